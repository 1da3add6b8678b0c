#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "rastercast/corpus.hpp"
#include "rastercast/error.hpp"
#include "rastercast/fmt.hpp"
#include "rastercast/parallel.hpp"
#include "rastercast/raster.hpp"
#include "rastercast/sparse.hpp"

namespace rastercast {

// Neumaier compensated accumulator: permutation-insensitive to ~1e-16.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

// Default exponent on the (2*pi*d^2) normalization factor. The formula pairs
// a 1-D-style constant with a 2-D squared norm; it is implemented verbatim,
// with the exponent exposed for sensitivity checks rather than silently
// "corrected" to -1.
inline constexpr double kKernelNormExponent = -0.5;

inline double gaussian_kernel(GeoPoint s, GeoPoint s_n, double d_n,
                              double norm_exponent = kKernelNormExponent) {
    if (!(d_n > 0.0)) throw ContractError("kernel dispersion must be positive");
    double dx = s.lon - s_n.lon;
    double dy = s.lat - s_n.lat;
    double two_d2 = 2.0 * d_n * d_n;
    double base = M_PI * two_d2;
    double norm = norm_exponent == -0.5 ? 1.0 / std::sqrt(base)
                                        : std::pow(base, norm_exponent);
    return norm * std::exp(-(dx * dx + dy * dy) / two_d2);
}

inline int temporal_indicator(int t, int t_n) { return t == t_n ? 1 : 0; }

enum class FeatureKind : std::uint8_t { smer, tfidf };

struct CellFeatures {
    std::size_t row = 0;
    std::size_t col = 0;
    int day = 0;
    double mass = 0.0;
    bool empty_mass = true;
    double smer = 0.0;   // scalar variant
    SparseVector tfidf;  // vector variant
};

namespace aggregate_detail {

// Shared reduction core. `indices` selects which messages may contribute
// (already same-day and inside any truncation circle), in corpus order.
template <typename Accumulate>
inline double reduce_mass(GeoPoint s, int t, const std::vector<GeoMessage>& msgs,
                          const std::vector<std::uint32_t>& indices,
                          double norm_exponent, Accumulate&& accumulate) {
    CompensatedSum den;
    for (std::uint32_t i : indices) {
        const GeoMessage& m = msgs[i];
        if (!temporal_indicator(t, m.t)) continue;
        double k = gaussian_kernel(s, m.s, m.d, norm_exponent);
        den.add(k);
        accumulate(i, k);
    }
    return den.value();
}

inline std::vector<std::uint32_t> all_indices(std::size_t n) {
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
    return idx;
}

}  // namespace aggregate_detail

// Eq-4-style scalar rate: sum K*I*z / sum K*I. Empty denominator yields 0
// with the empty-mass flag set.
inline CellFeatures cell_smer_indexed(GeoPoint s, int t,
                                      const std::vector<GeoMessage>& msgs,
                                      const std::vector<int>& z,
                                      const std::vector<std::uint32_t>& indices,
                                      double norm_exponent = kKernelNormExponent) {
    if (z.size() != msgs.size())
        throw ContractError("query indicator count must match message count");
    CompensatedSum num;
    double mass = aggregate_detail::reduce_mass(
        s, t, msgs, indices, norm_exponent, [&](std::uint32_t i, double k) {
            if (z[i]) num.add(k);
        });
    CellFeatures f;
    f.day = t;
    f.mass = mass;
    if (mass > 0.0) {
        f.empty_mass = false;
        f.smer = std::min(1.0, std::max(0.0, num.value() / mass));
    }
    return f;
}

inline CellFeatures cell_smer(GeoPoint s, int t, const std::vector<GeoMessage>& msgs,
                              const std::vector<int>& z,
                              double norm_exponent = kKernelNormExponent) {
    return cell_smer_indexed(s, t, msgs, z, aggregate_detail::all_indices(msgs.size()),
                             norm_exponent);
}

// Eq-6-style vector feature: kernel-weighted mean of unit TFIDF vectors,
// L2-renormalized (zero stays zero).
inline CellFeatures cell_tfidf_indexed(GeoPoint s, int t,
                                       const std::vector<GeoMessage>& msgs,
                                       const std::vector<SparseVector>& rhos,
                                       std::uint32_t dim,
                                       const std::vector<std::uint32_t>& indices,
                                       double norm_exponent = kKernelNormExponent) {
    if (rhos.size() != msgs.size())
        throw ContractError("tfidf vector count must match message count");
    std::vector<double> sum(dim, 0.0), comp(dim, 0.0);
    auto add_into = [&](std::uint32_t v, double x) {
        double t0 = sum[v] + x;
        if (std::abs(sum[v]) >= std::abs(x))
            comp[v] += (sum[v] - t0) + x;
        else
            comp[v] += (x - t0) + sum[v];
        sum[v] = t0;
    };
    double mass = aggregate_detail::reduce_mass(
        s, t, msgs, indices, norm_exponent, [&](std::uint32_t i, double k) {
            const SparseVector& rho = rhos[i];
            for (std::size_t j = 0; j < rho.idx.size(); ++j)
                add_into(rho.idx[j], k * rho.val[j]);
        });
    CellFeatures f;
    f.day = t;
    f.mass = mass;
    f.tfidf.dim = dim;
    if (mass > 0.0) {
        f.empty_mass = false;
        for (std::uint32_t v = 0; v < dim; ++v) {
            double x = (sum[v] + comp[v]) / mass;
            if (x != 0.0) f.tfidf.push(v, x);
        }
        f.tfidf.normalize();
    }
    return f;
}

inline CellFeatures cell_tfidf(GeoPoint s, int t, const std::vector<GeoMessage>& msgs,
                               const std::vector<SparseVector>& rhos, std::uint32_t dim,
                               double norm_exponent = kKernelNormExponent) {
    return cell_tfidf_indexed(s, t, msgs, rhos, dim,
                              aggregate_detail::all_indices(msgs.size()), norm_exponent);
}

struct AggregateConfig {
    // Messages contribute only to cells within radius*d_n of s_n; nullopt
    // disables truncation. Gaussian mass beyond 8 sigma is < 1e-14 relative.
    std::optional<double> truncation_radius = 8.0;
    double norm_exponent = kKernelNormExponent;
    int threads = 1;
};

struct FeatureGrid {
    Georef georef;
    int day = 0;
    FeatureKind kind = FeatureKind::smer;
    std::uint32_t dim = 1;
    std::vector<CellFeatures> cells;  // row-major, one per grid cell
};

namespace aggregate_detail {

// Per-cell candidate lists under truncation. Message indices are appended in
// corpus order, so each cell reduces in the same order as the untruncated
// oracle (minus skipped far-away terms).
inline std::vector<std::vector<std::uint32_t>> candidate_lists(
    const Georef& g, int day, const std::vector<GeoMessage>& msgs, double radius_mult) {
    std::vector<std::vector<std::uint32_t>> cand(g.size());
    for (std::uint32_t i = 0; i < msgs.size(); ++i) {
        const GeoMessage& m = msgs[i];
        if (m.t != day) continue;
        double radius = radius_mult * m.d;
        double r2 = radius * radius;
        auto col_range = [&](double origin, double coord, std::size_t count,
                             std::ptrdiff_t& lo, std::ptrdiff_t& hi) {
            lo = static_cast<std::ptrdiff_t>(
                std::ceil((coord - radius - origin) / g.resolution - 0.5));
            hi = static_cast<std::ptrdiff_t>(
                std::floor((coord + radius - origin) / g.resolution - 0.5));
            lo = std::max<std::ptrdiff_t>(lo, 0);
            hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(count) - 1);
        };
        std::ptrdiff_t c_lo, c_hi, r_lo, r_hi;
        col_range(g.origin_lon, m.s.lon, g.n_cols, c_lo, c_hi);
        col_range(g.origin_lat, m.s.lat, g.n_rows, r_lo, r_hi);
        for (std::ptrdiff_t r = r_lo; r <= r_hi; ++r) {
            double dy = g.origin_lat + (static_cast<double>(r) + 0.5) * g.resolution -
                        m.s.lat;
            for (std::ptrdiff_t c = c_lo; c <= c_hi; ++c) {
                double dx = g.origin_lon +
                            (static_cast<double>(c) + 0.5) * g.resolution - m.s.lon;
                if (dx * dx + dy * dy <= r2)
                    cand[g.index(static_cast<std::size_t>(r),
                                 static_cast<std::size_t>(c))]
                        .push_back(i);
            }
        }
    }
    return cand;
}

template <typename CellFn>
inline FeatureGrid aggregate_impl(const Georef& g, int day,
                                  const std::vector<GeoMessage>& msgs,
                                  const AggregateConfig& cfg, FeatureKind kind,
                                  std::uint32_t dim, CellFn&& cell_fn) {
    FeatureGrid out;
    out.georef = g;
    out.day = day;
    out.kind = kind;
    out.dim = dim;
    out.cells.resize(g.size());

    std::vector<std::vector<std::uint32_t>> cand;
    std::vector<std::uint32_t> all;
    if (cfg.truncation_radius) {
        cand = candidate_lists(g, day, msgs, *cfg.truncation_radius);
    } else {
        all = all_indices(msgs.size());
    }

    parallel_for(g.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t cell = begin; cell < end; ++cell) {
            std::size_t row = cell / g.n_cols;
            std::size_t col = cell % g.n_cols;
            GeoPoint s = cell_center(g, row, col);
            const std::vector<std::uint32_t>& idx =
                cfg.truncation_radius ? cand[cell] : all;
            CellFeatures f = cell_fn(s, idx);
            f.row = row;
            f.col = col;
            out.cells[cell] = std::move(f);
        }
    });
    return out;
}

}  // namespace aggregate_detail

inline FeatureGrid aggregate_smer(const Georef& g, int day,
                                  const std::vector<GeoMessage>& msgs,
                                  const std::vector<int>& z,
                                  const AggregateConfig& cfg = {}) {
    return aggregate_detail::aggregate_impl(
        g, day, msgs, cfg, FeatureKind::smer, 1,
        [&](GeoPoint s, const std::vector<std::uint32_t>& idx) {
            return cell_smer_indexed(s, day, msgs, z, idx, cfg.norm_exponent);
        });
}

inline FeatureGrid aggregate_tfidf(const Georef& g, int day,
                                   const std::vector<GeoMessage>& msgs,
                                   const std::vector<SparseVector>& rhos,
                                   std::uint32_t dim,
                                   const AggregateConfig& cfg = {}) {
    return aggregate_detail::aggregate_impl(
        g, day, msgs, cfg, FeatureKind::tfidf, dim,
        [&](GeoPoint s, const std::vector<std::uint32_t>& idx) {
            return cell_tfidf_indexed(s, day, msgs, rhos, dim, idx, cfg.norm_exponent);
        });
}

// ---------------------------------------------------------------------------
// Feature dump: header `feature smer` or `feature tfidf <vocab-file>`, a grid
// line `grid <rows> <cols>`, then one line per non-empty cell:
// `row col day mass smer` or `row col day mass dim:val dim:val ...`.
// ---------------------------------------------------------------------------

struct FeatureDumpEntry {
    std::size_t row = 0;
    std::size_t col = 0;
    int day = 0;
    double mass = 0.0;
    double smer = 0.0;
    SparseVector tfidf;
};

struct FeatureDump {
    FeatureKind kind = FeatureKind::smer;
    std::string vocab_file;  // tfidf only
    std::uint32_t dim = 1;
    std::size_t n_rows = 0;  // dimensions of the source grid
    std::size_t n_cols = 0;
    std::vector<FeatureDumpEntry> entries;
};

inline void append_to_dump(FeatureDump& dump, const FeatureGrid& grid) {
    if (dump.n_rows == 0 && dump.n_cols == 0) {
        dump.n_rows = grid.georef.n_rows;
        dump.n_cols = grid.georef.n_cols;
    } else if (dump.n_rows != grid.georef.n_rows ||
               dump.n_cols != grid.georef.n_cols) {
        throw ContractError("cannot mix grids of different dimensions in one dump");
    }
    dump.kind = grid.kind;
    dump.dim = grid.dim;
    for (const CellFeatures& f : grid.cells) {
        if (f.empty_mass) continue;
        FeatureDumpEntry e;
        e.row = f.row;
        e.col = f.col;
        e.day = f.day;
        e.mass = f.mass;
        e.smer = f.smer;
        e.tfidf = f.tfidf;
        dump.entries.push_back(std::move(e));
    }
}

inline void write_feature_dump(const FeatureDump& dump, const std::string& path) {
    if (dump.n_rows == 0 || dump.n_cols == 0)
        throw ContractError("feature dump carries no grid dimensions");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open feature dump for writing: " + path);
    if (dump.kind == FeatureKind::smer) {
        out << "feature smer\n";
    } else {
        out << "feature tfidf " << dump.vocab_file << '\n';
    }
    out << "grid " << dump.n_rows << ' ' << dump.n_cols << '\n';
    std::string line;
    for (const FeatureDumpEntry& e : dump.entries) {
        line = std::to_string(e.row) + ' ' + std::to_string(e.col) + ' ' +
               std::to_string(e.day) + ' ' + format_exact(e.mass);
        if (dump.kind == FeatureKind::smer) {
            line += ' ';
            line += format_exact(e.smer);
        } else {
            for (std::size_t j = 0; j < e.tfidf.idx.size(); ++j) {
                line += ' ';
                line += std::to_string(e.tfidf.idx[j]);
                line += ':';
                line += format_exact(e.tfidf.val[j]);
            }
        }
        line += '\n';
        out << line;
    }
    out.flush();
    if (!out) throw IoError("failed writing feature dump: " + path);
}

inline FeatureDump load_feature_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature dump: " + path);
    FeatureDump dump;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> void {
        throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
    };

    if (!std::getline(in, line)) throw ParseError(path + ": missing header line");
    ++line_no;
    {
        auto toks = detail::split_ws(line);
        if (toks.size() < 2 || toks[0] != "feature") fail("expected 'feature <kind>' header");
        if (toks[1] == "smer" && toks.size() == 2) {
            dump.kind = FeatureKind::smer;
        } else if (toks[1] == "tfidf" && toks.size() == 3) {
            dump.kind = FeatureKind::tfidf;
            dump.vocab_file = std::string(toks[2]);
        } else {
            fail("header must be 'feature smer' or 'feature tfidf <vocab-file>'");
        }
    }
    if (!std::getline(in, line)) throw ParseError(path + ": missing grid line");
    ++line_no;
    {
        auto toks = detail::split_ws(line);
        long long rows = 0, cols = 0;
        if (toks.size() != 3 || toks[0] != "grid" || !parse_long(toks[1], rows) ||
            !parse_long(toks[2], cols) || rows <= 0 || cols <= 0)
            fail("expected 'grid <rows> <cols>'");
        dump.n_rows = static_cast<std::size_t>(rows);
        dump.n_cols = static_cast<std::size_t>(cols);
    }

    std::uint32_t max_dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() < 4) fail("expected at least 'row col day mass'");
        FeatureDumpEntry e;
        long long row, col, day;
        if (!parse_long(toks[0], row) || row < 0) fail("bad row index");
        if (!parse_long(toks[1], col) || col < 0) fail("bad col index");
        if (row >= static_cast<long long>(dump.n_rows) ||
            col >= static_cast<long long>(dump.n_cols))
            fail("cell (" + std::string(toks[0]) + ", " + std::string(toks[1]) +
                 ") outside the declared " + std::to_string(dump.n_rows) + "x" +
                 std::to_string(dump.n_cols) + " grid");
        if (!parse_long(toks[2], day)) fail("bad day index");
        if (!parse_double(toks[3], e.mass)) fail("bad mass value");
        e.row = static_cast<std::size_t>(row);
        e.col = static_cast<std::size_t>(col);
        e.day = static_cast<int>(day);
        if (dump.kind == FeatureKind::smer) {
            if (toks.size() != 5) fail("smer line needs exactly 5 fields");
            if (!parse_double(toks[4], e.smer)) fail("bad smer value");
        } else {
            for (std::size_t k = 4; k < toks.size(); ++k) {
                std::string_view pair = toks[k];
                std::size_t colon = pair.find(':');
                if (colon == std::string_view::npos) fail("expected dim:val pair");
                long long dim_idx;
                double val;
                if (!parse_long(pair.substr(0, colon), dim_idx) || dim_idx < 0)
                    fail("bad dimension index");
                if (!parse_double(pair.substr(colon + 1), val)) fail("bad pair value");
                e.tfidf.push(static_cast<std::uint32_t>(dim_idx), val);
                max_dim = std::max(max_dim, static_cast<std::uint32_t>(dim_idx) + 1);
            }
        }
        dump.entries.push_back(std::move(e));
    }
    if (dump.kind == FeatureKind::tfidf) {
        dump.dim = max_dim;
        for (FeatureDumpEntry& e : dump.entries) e.tfidf.dim = max_dim;
    }
    return dump;
}

}  // namespace rastercast
