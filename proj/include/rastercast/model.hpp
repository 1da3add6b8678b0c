#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "rastercast/error.hpp"
#include "rastercast/fmt.hpp"
#include "rastercast/rng.hpp"
#include "rastercast/sparse.hpp"

namespace rastercast {

// ---------------------------------------------------------------------------
// Design matrix: CSR rows of sparse features, implicit intercept column.
// Weight vectors have length D+1 with index 0 = intercept.
// ---------------------------------------------------------------------------

struct Design {
    std::vector<double> values;
    std::vector<std::uint32_t> cols;     // feature dims, 0-based (no intercept)
    std::vector<std::size_t> row_ptr{0};
    std::vector<double> labels;          // 0.0 / 1.0
    std::uint32_t dim = 0;               // D

    std::size_t n_rows() const { return labels.size(); }

    void add_row(const SparseVector& x, int y) {
        if (y != 0 && y != 1) throw ContractError("labels must be 0 or 1");
        for (std::size_t k = 0; k < x.idx.size(); ++k) {
            if (x.idx[k] >= dim) throw ContractError("feature index exceeds design dimension");
            values.push_back(x.val[k]);
            cols.push_back(x.idx[k]);
        }
        row_ptr.push_back(values.size());
        labels.push_back(static_cast<double>(y));
    }

    // w has length dim+1, intercept first.
    double margin(const std::vector<double>& w, std::size_t row) const {
        double a = w[0];
        for (std::size_t k = row_ptr[row]; k < row_ptr[row + 1]; ++k)
            a += values[k] * w[cols[k] + 1];
        return a;
    }

    double row_sq_norm(std::size_t row) const {
        double s = 0.0;
        for (std::size_t k = row_ptr[row]; k < row_ptr[row + 1]; ++k)
            s += values[k] * values[k];
        return s;
    }

    Design subset(const std::vector<std::size_t>& rows) const {
        Design out;
        out.dim = dim;
        for (std::size_t r : rows) {
            out.labels.push_back(labels[r]);
            for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
                out.values.push_back(values[k]);
                out.cols.push_back(cols[k]);
            }
            out.row_ptr.push_back(out.values.size());
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Probability, loss, gradient
// ---------------------------------------------------------------------------

namespace model_detail {

inline double sigmoid(double a) {
    if (a >= 0.0) {
        double e = std::exp(-a);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(a);
    return e / (1.0 + e);
}

// log(1 + exp(a)) without overflow
inline double softplus(double a) {
    return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

// Branchless so the solvers' dense shrink passes vectorize; equal to the
// three-way case split (a zero result may carry x's sign, which arithmetic
// and w != 0 tests cannot distinguish from +0).
inline double soft_threshold(double x, double thr) {
    double m = std::max(std::abs(x) - thr, 0.0);
    return std::copysign(m, x);
}

}  // namespace model_detail

// sigma(w0 + w.x), clamped inside the open machine-representable (0,1) so a
// margin of -1000 still yields a positive probability and finite logs.
inline double predict_proba(const std::vector<double>& w,
                            const std::vector<double>& x) {
    if (w.size() != x.size() + 1)
        throw ContractError("weight vector must have one more entry than features");
    double a = w[0];
    for (std::size_t i = 0; i < x.size(); ++i) a += w[i + 1] * x[i];
    double p = model_detail::sigmoid(a);
    return std::clamp(p, std::numeric_limits<double>::denorm_min(),
                      std::nextafter(1.0, 0.0));
}

inline double predict_proba_margin(double a) {
    double p = model_detail::sigmoid(a);
    return std::clamp(p, std::numeric_limits<double>::denorm_min(),
                      std::nextafter(1.0, 0.0));
}

// Full objective: c*||w||_1 - sum_i [y ln sigma + (1-y) ln(1-sigma)]. The L1
// term spans all D+1 coefficients unless the intercept is exempted.
inline double loss(const std::vector<double>& w, const Design& design, double c,
                   bool penalize_intercept = true) {
    if (c < 0.0) throw ContractError("regularization constant must be nonnegative");
    if (w.size() != design.dim + 1u) throw ContractError("weight length must be D+1");
    double nll = 0.0;
    for (std::size_t i = 0; i < design.n_rows(); ++i) {
        double a = design.margin(w, i);
        nll += model_detail::softplus(a) - design.labels[i] * a;
    }
    double l1 = 0.0;
    for (std::size_t j = penalize_intercept ? 0 : 1; j < w.size(); ++j)
        l1 += std::abs(w[j]);
    return c * l1 + nll;
}

// Gradient of the smooth (negative log-likelihood) part: sum (sigma(a)-y)*phi.
inline std::vector<double> grad_smooth(const std::vector<double>& w,
                                       const Design& design) {
    if (w.size() != design.dim + 1u) throw ContractError("weight length must be D+1");
    std::vector<double> g(design.dim + 1u, 0.0);
    for (std::size_t i = 0; i < design.n_rows(); ++i) {
        double r = model_detail::sigmoid(design.margin(w, i)) - design.labels[i];
        g[0] += r;
        for (std::size_t k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k)
            g[design.cols[k] + 1] += r * design.values[k];
    }
    return g;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitResult {
    std::vector<double> w;  // length D+1, intercept first
    double c = 0.0;
    std::vector<std::uint32_t> nonzero;  // feature dims with w != 0 (intercept excluded)
    double loss = 0.0;                   // full objective at w
    int epochs = 0;
    bool converged = false;
};

struct SagaOptions {
    double step_size = 0.0;  // <= 0: auto 1/(3*Lhat), Lhat = max ||phi||^2 / 4
    int max_epochs = 500;
    double tol = 1e-8;  // relative epoch-over-epoch objective change
    std::uint64_t seed = 0;
    bool penalize_intercept = true;
};

namespace model_detail {

inline void finish_result(FitResult& res, const Design& design, double c,
                          bool penalize_intercept) {
    res.c = c;
    res.nonzero.clear();
    for (std::uint32_t j = 1; j < res.w.size(); ++j)
        if (res.w[j] != 0.0) res.nonzero.push_back(j - 1);
    res.loss = loss(res.w, design, c, penalize_intercept);
}

inline double auto_step(const Design& design) {
    double max_sq = 0.0;
    for (std::size_t i = 0; i < design.n_rows(); ++i)
        max_sq = std::max(max_sq, 1.0 + design.row_sq_norm(i));  // +1: intercept
    double lhat = max_sq / 4.0;
    return 1.0 / (3.0 * lhat);
}

}  // namespace model_detail

// SAGA with scalar stored derivatives (sigma(a_i) - y_i) and proximal
// handling of the L1 term. Internally works on the mean-scaled objective
// (1/n) sum f_i + (c/n)||w||_1, which shares its minimizer with the summed
// form; reported loss and the stopping criterion use the summed objective.
inline FitResult fit_saga(const Design& design, double c,
                          const SagaOptions& opt = {}) {
    using namespace model_detail;
    if (c < 0.0) throw ContractError("regularization constant must be nonnegative");
    std::size_t n = design.n_rows();
    if (n == 0) throw ContractError("cannot fit on an empty design");
    std::uint32_t width = design.dim + 1;

    double gamma = opt.step_size > 0.0 ? opt.step_size : auto_step(design);
    double thr = gamma * c / static_cast<double>(n);

    // For mostly-dense designs a row-major dense copy turns the per-iteration
    // dot and axpy walks into contiguous passes instead of indexed gathers.
    // Zero entries contribute exact zeros in index order, so the iterates are
    // identical to the sparse path's.
    const bool densify = design.dim >= 8 &&
                         design.values.size() * 4 >= n * design.dim &&
                         n * design.dim <= (std::size_t{1} << 25);
    std::vector<double> dense_rows;
    if (densify) {
        dense_rows.assign(n * design.dim, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k)
                dense_rows[i * design.dim + design.cols[k]] = design.values[k];
    }

    std::vector<double> w(width, 0.0);
    // stored derivative table at w = 0: sigma(0) - y
    std::vector<double> alpha(n);
    std::vector<double> gbar(width, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        alpha[i] = 0.5 - design.labels[i];
        gbar[0] += alpha[i];
        for (std::size_t k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k)
            gbar[design.cols[k] + 1] += alpha[i] * design.values[k];
    }
    double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : gbar) g *= inv_n;

    Rng rng(opt.seed);
    FitResult res;
    double prev_obj = loss(w, design, c, opt.penalize_intercept);
    bool converged = false;
    int epoch = 0;
    while (epoch < opt.max_epochs && !converged) {
        ++epoch;
        for (std::size_t it = 0; it < n; ++it) {
            std::size_t i = rng.below(n);
            const double* __restrict xr =
                densify ? dense_rows.data() + i * design.dim : nullptr;
            double a = w[0];
            if (densify) {
                // four independent accumulators: breaks the serial FP add
                // chain so the loop pipelines/vectorizes; order is fixed by
                // the source, so results stay deterministic
                const double* __restrict wf = w.data() + 1;
                double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                std::uint32_t j = 0;
                for (; j + 4 <= design.dim; j += 4) {
                    a0 += xr[j] * wf[j];
                    a1 += xr[j + 1] * wf[j + 1];
                    a2 += xr[j + 2] * wf[j + 2];
                    a3 += xr[j + 3] * wf[j + 3];
                }
                for (; j < design.dim; ++j) a0 += xr[j] * wf[j];
                a += (a0 + a1) + (a2 + a3);
            } else {
                for (std::size_t k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k)
                    a += design.values[k] * w[design.cols[k] + 1];
            }
            double delta = sigmoid(a) - design.labels[i] - alpha[i];

            // row-local part of the step, the mean-gradient subtraction, the
            // proximal shrink, and the stored-gradient update; the dense path
            // fuses them into one elementwise pass
            double gd = gamma * delta;
            double dn = delta * inv_n;
            if (densify) {
                double w0 = w[0] - gd - gamma * gbar[0];
                w[0] = opt.penalize_intercept ? soft_threshold(w0, thr) : w0;
                gbar[0] += dn;
                double* __restrict wf = w.data() + 1;
                double* __restrict gm = gbar.data() + 1;
                for (std::uint32_t j = 0; j < design.dim; ++j) {
                    wf[j] = soft_threshold(wf[j] - gd * xr[j] - gamma * gm[j], thr);
                    gm[j] += dn * xr[j];
                }
            } else {
                w[0] -= gd;
                for (std::size_t k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k)
                    w[design.cols[k] + 1] -= gd * design.values[k];
                double* __restrict wp = w.data();
                const double* __restrict gp = gbar.data();
                if (opt.penalize_intercept) {
                    for (std::uint32_t j = 0; j < width; ++j)
                        wp[j] = soft_threshold(wp[j] - gamma * gp[j], thr);
                } else {
                    wp[0] -= gamma * gp[0];
                    for (std::uint32_t j = 1; j < width; ++j)
                        wp[j] = soft_threshold(wp[j] - gamma * gp[j], thr);
                }
                gbar[0] += dn;
                for (std::size_t k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k)
                    gbar[design.cols[k] + 1] += dn * design.values[k];
            }
            alpha[i] += delta;
        }
        double obj = loss(w, design, c, opt.penalize_intercept);
        if (!std::isfinite(obj))
            throw SolverError("saga diverged at epoch " + std::to_string(epoch));
        if (std::abs(prev_obj - obj) <
            opt.tol * std::max(std::abs(prev_obj), 1e-300))
            converged = true;
        prev_obj = obj;
    }
    res.w = std::move(w);
    res.epochs = epoch;
    res.converged = converged;
    model_detail::finish_result(res, design, c, opt.penalize_intercept);
    return res;
}

struct ReferenceOptions {
    double tol = 1e-12;  // relative objective change per iteration
    int max_iters = 200000;
    bool penalize_intercept = true;
    std::vector<double> w0;  // optional warm start, length D+1
};

// Full-batch proximal gradient with FISTA momentum, backtracking line search,
// and a monotone restart safeguard. Independent of fit_saga by construction:
// different algorithm, shared only by the loss/gradient definitions.
inline FitResult fit_reference(const Design& design, double c,
                               const ReferenceOptions& opt = {}) {
    using namespace model_detail;
    if (c < 0.0) throw ContractError("regularization constant must be nonnegative");
    std::size_t n = design.n_rows();
    if (n == 0) throw ContractError("cannot fit on an empty design");
    std::uint32_t width = design.dim + 1;
    double inv_n = 1.0 / static_cast<double>(n);
    double lam = c * inv_n;  // penalty weight on the mean scale

    auto f_val = [&](const std::vector<double>& w) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double a = design.margin(w, i);
            s += softplus(a) - design.labels[i] * a;
        }
        return s * inv_n;
    };
    auto f_grad = [&](const std::vector<double>& w, std::vector<double>& g) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double r = sigmoid(design.margin(w, i)) - design.labels[i];
            g[0] += r;
            for (std::size_t k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k)
                g[design.cols[k] + 1] += r * design.values[k];
        }
        for (double& v : g) v *= inv_n;
    };
    auto h_val = [&](const std::vector<double>& w) {
        double s = 0.0;
        for (std::uint32_t j = opt.penalize_intercept ? 0 : 1; j < width; ++j)
            s += std::abs(w[j]);
        return lam * s;
    };
    auto prox = [&](std::vector<double>& w, double eta) {
        double thr = eta * lam;
        for (std::uint32_t j = opt.penalize_intercept ? 0 : 1; j < width; ++j)
            w[j] = soft_threshold(w[j], thr);
    };

    std::vector<double> w = opt.w0;
    if (w.empty()) w.assign(width, 0.0);
    if (w.size() != width) throw ContractError("warm start length must be D+1");

    std::vector<double> y = w, w_prev = w, g(width), cand(width);
    double t_m = 1.0;
    double eta = auto_step(design) * 3.0;  // 1/Lhat; backtracking shrinks as needed
    double obj = f_val(w) + h_val(w);
    int iter = 0;
    bool converged = false;

    while (iter < opt.max_iters && !converged) {
        ++iter;
        f_grad(y, g);
        double fy = f_val(y);
        // backtracking on the smooth majorization at y
        for (;;) {
            for (std::uint32_t j = 0; j < width; ++j) cand[j] = y[j] - eta * g[j];
            prox(cand, eta);
            double q = fy, dist = 0.0;
            for (std::uint32_t j = 0; j < width; ++j) {
                double dj = cand[j] - y[j];
                q += g[j] * dj;
                dist += dj * dj;
            }
            q += dist / (2.0 * eta);
            if (f_val(cand) <= q + 1e-15 * std::abs(q)) break;
            eta *= 0.5;
            if (eta < 1e-18)
                throw SolverError("reference solver line search failed at iteration " +
                                  std::to_string(iter));
        }
        double cand_obj = f_val(cand) + h_val(cand);
        if (!std::isfinite(cand_obj))
            throw SolverError("reference solver diverged at iteration " +
                              std::to_string(iter));

        if (cand_obj > obj) {
            if (t_m == 1.0) {
                // y == w here, so the plain proximal step cannot ascend beyond
                // the line-search rounding slack: no measurable descent is
                // left and the iterate is already optimal to tolerance
                converged = true;
                break;
            }
            // momentum overshot: restart from the last iterate
            t_m = 1.0;
            y = w;
            continue;
        }
        double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t_m * t_m)) / 2.0;
        w_prev = w;
        w = cand;
        double coef = (t_m - 1.0) / t_next;
        for (std::uint32_t j = 0; j < width; ++j)
            y[j] = w[j] + coef * (w[j] - w_prev[j]);
        t_m = t_next;

        if (std::abs(obj - cand_obj) < opt.tol * std::max(std::abs(obj), 1e-300))
            converged = true;
        obj = cand_obj;
    }

    FitResult res;
    res.w = std::move(w);
    res.epochs = iter;
    res.converged = converged;
    model_detail::finish_result(res, design, c, opt.penalize_intercept);
    return res;
}

// ---------------------------------------------------------------------------
// Classification, F1, cross-validation
// ---------------------------------------------------------------------------

// p > 1/2 is flooded, p < 1/2 dry. An exact 1/2 — which a fitted model only
// produces when the features carry no information (e.g. all-zero designs) —
// is resolved by a seeded coin flip so that uninformative models score at
// chance level instead of degenerating to all-dry.
inline int classify(double p, Rng& tie_rng) {
    if (p > 0.5) return 1;
    if (p < 0.5) return 0;
    return tie_rng.below(2) == 1 ? 1 : 0;
}

inline double f1_score(const std::vector<int>& predicted,
                       const std::vector<int>& actual) {
    if (predicted.size() != actual.size() || predicted.empty())
        throw ContractError("f1_score needs equal-length non-empty sequences");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == 1 && actual[i] == 1) ++tp;
        else if (predicted[i] == 1 && actual[i] == 0) ++fp;
        else if (predicted[i] == 0 && actual[i] == 1) ++fn;
    }
    if (tp == 0) return 0.0;  // covers precision+recall = 0
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

inline std::vector<double> default_c_grid(std::size_t n_rows) {
    std::vector<double> grid;
    for (int e = -4; e <= 2; ++e)
        grid.push_back(std::pow(10.0, e) * static_cast<double>(n_rows));
    return grid;
}

// Stratified fold ids: each class is shuffled, then dealt round-robin, so
// label proportions carry over to every fold.
inline std::vector<int> stratified_folds(const std::vector<double>& labels,
                                         int folds, std::uint64_t seed) {
    if (folds < 2) throw ContractError("cross-validation needs at least 2 folds");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == 1.0 ? pos : neg).push_back(i);
    if (pos.size() < static_cast<std::size_t>(folds) ||
        neg.size() < static_cast<std::size_t>(folds))
        throw ContractError("a class has fewer members than folds; a fold would "
                            "hold a single class");
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<int> fold_of(labels.size());
    for (std::size_t k = 0; k < pos.size(); ++k) fold_of[pos[k]] = static_cast<int>(k % folds);
    for (std::size_t k = 0; k < neg.size(); ++k) fold_of[neg[k]] = static_cast<int>(k % folds);
    return fold_of;
}

struct CvResult {
    double chosen_c = 0.0;
    std::vector<double> mean_f1;  // per grid entry
};

inline CvResult cross_validate_c(const Design& design,
                                 const std::vector<double>& grid, int folds,
                                 std::uint64_t seed, const SagaOptions& fit_opt = {}) {
    if (grid.empty()) throw ContractError("cross-validation grid must be non-empty");
    std::vector<int> fold_of = stratified_folds(design.labels, folds, seed);

    // fold index lists, reused across the grid
    std::vector<std::vector<std::size_t>> train_rows(folds), valid_rows(folds);
    for (std::size_t i = 0; i < design.n_rows(); ++i) {
        for (int f = 0; f < folds; ++f)
            (fold_of[i] == f ? valid_rows[f] : train_rows[f]).push_back(i);
    }
    std::vector<Design> train_designs, valid_designs;
    for (int f = 0; f < folds; ++f) {
        train_designs.push_back(design.subset(train_rows[f]));
        valid_designs.push_back(design.subset(valid_rows[f]));
    }

    CvResult result;
    double best_f1 = -1.0;
    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        double mean = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::uint64_t k = static_cast<std::uint64_t>(ci) * folds + f;
            SagaOptions o = fit_opt;
            o.seed = derive_seed(seed, 2 * k + 1);
            FitResult fit = fit_saga(train_designs[f], grid[ci], o);
            Rng tie_rng(derive_seed(seed, 2 * k + 2));
            const Design& vd = valid_designs[f];
            std::vector<int> pred(vd.n_rows()), actual(vd.n_rows());
            for (std::size_t i = 0; i < vd.n_rows(); ++i) {
                pred[i] = classify(predict_proba_margin(vd.margin(fit.w, i)), tie_rng);
                actual[i] = static_cast<int>(vd.labels[i]);
            }
            mean += f1_score(pred, actual);
        }
        mean /= folds;
        result.mean_f1.push_back(mean);
        if (mean > best_f1 ||
            (mean == best_f1 && grid[ci] > result.chosen_c)) {
            best_f1 = mean;
            result.chosen_c = grid[ci];
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Relevance scores
// ---------------------------------------------------------------------------

struct RelevanceReport {
    std::vector<double> mean_score;          // per feature dim
    std::vector<std::uint32_t> intersection;  // selected in every run
    std::vector<std::uint32_t> union_set;     // selected in any run
    std::vector<std::size_t> runs_selected;   // per feature dim
};

// Per run: rank selected features by decreasing |w| (rank 0 = largest, ties
// by dimension), score (kappa - rank)/kappa, others 0; mean over runs.
inline RelevanceReport relevance_scores(const std::vector<FitResult>& fits) {
    if (fits.empty()) throw ContractError("relevance_scores needs at least one fit");
    std::size_t dim = fits[0].w.size() - 1;
    RelevanceReport rep;
    rep.mean_score.assign(dim, 0.0);
    rep.runs_selected.assign(dim, 0);
    std::vector<std::size_t> selected_count(dim, 0);

    for (const FitResult& fit : fits) {
        if (fit.w.size() != dim + 1)
            throw ContractError("all fits must share one dimensionality");
        std::vector<std::pair<double, std::uint32_t>> ranked;  // (|w|, dim)
        for (std::uint32_t d : fit.nonzero)
            ranked.emplace_back(std::abs(fit.w[d + 1]), d);
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        double kappa = static_cast<double>(ranked.size());
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            rep.mean_score[ranked[r].second] +=
                (kappa - static_cast<double>(r)) / kappa;
            ++selected_count[ranked[r].second];
        }
    }
    double n_runs = static_cast<double>(fits.size());
    for (std::size_t d = 0; d < dim; ++d) {
        rep.mean_score[d] /= n_runs;
        rep.runs_selected[d] = selected_count[d];
        if (selected_count[d] == fits.size())
            rep.intersection.push_back(static_cast<std::uint32_t>(d));
        if (selected_count[d] > 0) rep.union_set.push_back(static_cast<std::uint32_t>(d));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Model file: `c <value>` / `intercept <value>` / `<dim> <weight>` lines for
// nonzero coefficients, 9 significant digits.
// ---------------------------------------------------------------------------

inline void write_model(const FitResult& fit, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open model file for writing: " + path);
    out << "c " << format_g9(fit.c) << '\n';
    out << "intercept " << format_g9(fit.w[0]) << '\n';
    for (std::uint32_t d : fit.nonzero)
        out << d << ' ' << format_g9(fit.w[d + 1]) << '\n';
    out.flush();
    if (!out) throw IoError("failed writing model file: " + path);
}

struct LoadedModel {
    double c = 0.0;
    double intercept = 0.0;
    std::vector<std::pair<std::uint32_t, double>> weights;  // nonzero dims

    // Dense weight vector of length dim+1; fails if the model references a
    // dimension the feature space does not have.
    std::vector<double> to_weights(std::uint32_t dim) const {
        std::vector<double> w(dim + 1u, 0.0);
        w[0] = intercept;
        for (const auto& [d, v] : weights) {
            if (d >= dim)
                throw ContractError("model references feature dimension " +
                                    std::to_string(d) + " but features have only " +
                                    std::to_string(dim));
            w[d + 1] = v;
        }
        return w;
    }
};

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    LoadedModel model;
    std::string key;
    if (!(in >> key >> model.c) || key != "c")
        throw ParseError(path + ": expected 'c <value>' on line 1");
    if (!(in >> key >> model.intercept) || key != "intercept")
        throw ParseError(path + ": expected 'intercept <value>' on line 2");
    long long d;
    double v;
    while (in >> d >> v) {
        if (d < 0) throw ParseError(path + ": negative feature dimension");
        model.weights.emplace_back(static_cast<std::uint32_t>(d), v);
    }
    if (!in.eof() && in.fail())
        throw ParseError(path + ": malformed weight line");
    return model;
}

}  // namespace rastercast
