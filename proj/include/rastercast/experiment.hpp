#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "rastercast/aggregate.hpp"
#include "rastercast/error.hpp"
#include "rastercast/fmt.hpp"
#include "rastercast/model.hpp"
#include "rastercast/parallel.hpp"
#include "rastercast/raster.hpp"
#include "rastercast/rng.hpp"

namespace rastercast {

// ---------------------------------------------------------------------------
// Balanced cell sampling
// ---------------------------------------------------------------------------

// Draws size/2 flooded and size/2 dry cell indices uniformly without
// replacement (partial Fisher-Yates over each class). `eligible`, when given,
// restricts the pool (nonzero byte = allowed); excluded cells never qualify.
// The result is sorted ascending.
inline std::vector<std::size_t> balanced_sample(const LabelGrid& labels,
                                                std::size_t size,
                                                std::uint64_t seed,
                                                const std::vector<char>* eligible = nullptr) {
    if (size == 0 || size % 2 != 0)
        throw ContractError("sample size must be positive and even");
    if (eligible && eligible->size() != labels.labels.size())
        throw ContractError("eligibility mask must match the grid size");

    std::vector<std::size_t> flooded, dry;
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        if (eligible && !(*eligible)[i]) continue;
        if (labels.labels[i] == CellLabel::flooded) flooded.push_back(i);
        else if (labels.labels[i] == CellLabel::dry) dry.push_back(i);
    }
    const std::size_t half = size / 2;
    if (flooded.size() < half)
        throw ContractError("sampling error: " + std::to_string(flooded.size()) +
                            " eligible flooded cells, need " + std::to_string(half));
    if (dry.size() < half)
        throw ContractError("sampling error: " + std::to_string(dry.size()) +
                            " eligible dry cells, need " + std::to_string(half));

    Rng rng(seed);
    auto draw = [&](std::vector<std::size_t>& pool) {
        for (std::size_t i = 0; i < half; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(half);
    };
    draw(flooded);
    draw(dry);

    std::vector<std::size_t> out;
    out.reserve(size);
    out.insert(out.end(), flooded.begin(), flooded.end());
    out.insert(out.end(), dry.begin(), dry.end());
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Experiment protocol
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::size_t n_runs = 20;
    std::size_t train_size = 20000;  // balanced halves
    std::size_t test_size = 2000;
    int cv_folds = 5;
    std::vector<double> cv_grid;  // empty: default grid scaled by train rows
    std::uint64_t seed = 0;
    unsigned threads = 1;
    SagaOptions fit_options;  // per-run seed is overridden internally
};

struct RunRecord {
    double f1 = 0.0;
    std::size_t nonzero_count = 0;
    double chosen_c = 0.0;
    FitResult fit;
    std::vector<std::size_t> train_cells;
    std::vector<std::size_t> test_cells;
};

struct ExperimentReport {
    std::vector<RunRecord> runs;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;  // sample std, n-1 denominator; 0 for a single run
    double mean_nonzero = 0.0;
    double median_nonzero = 0.0;
    RelevanceReport relevance;
    std::uint32_t dim = 0;
};

namespace experiment_detail {

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace experiment_detail

// Design rows for the given cells. TFIDF cell vectors are renormalized to
// unit length here, at the entrance of the design, regardless of upstream
// normalization; SMER contributes a single scalar feature.
inline Design build_design(const FeatureGrid& features, const LabelGrid& labels,
                           const std::vector<std::size_t>& cells) {
    if (features.cells.size() != labels.labels.size())
        throw ContractError("feature grid and label grid sizes differ");
    Design d;
    d.dim = features.kind == FeatureKind::smer ? 1 : features.dim;
    for (std::size_t cell : cells) {
        const CellFeatures& f = features.cells[cell];
        CellLabel lbl = labels.labels[cell];
        if (lbl == CellLabel::excluded)
            throw ContractError("excluded cell " + std::to_string(cell) +
                                " cannot enter a design");
        SparseVector x;
        if (features.kind == FeatureKind::smer) {
            x.dim = 1;
            if (f.smer != 0.0) x.push(0, f.smer);
        } else {
            x = f.tfidf;
            x.dim = features.dim;
            x.normalize();
        }
        d.add_row(x, lbl == CellLabel::flooded ? 1 : 0);
    }
    return d;
}

// One full protocol: per run, draw disjoint balanced train/test samples,
// cross-validate c, fit on the training sample, score F1 on the test sample;
// then aggregate. Every run consumes only seeds derived from (master seed,
// run index), so runs are order- and thread-count-independent.
inline ExperimentReport run_experiment(const ExperimentConfig& config,
                                       const LabelGrid& labels,
                                       const FeatureGrid& features) {
    if (config.n_runs == 0) throw ContractError("need at least one run");
    if (config.cv_folds < 2) throw ContractError("cross-validation needs at least 2 folds");
    if (features.cells.size() != labels.labels.size())
        throw ContractError("feature grid and label grid sizes differ");

    // Cells with no kernel mass carry no feature information and are
    // ineligible for sampling, as are excluded cells.
    std::vector<char> eligible(labels.labels.size(), 0);
    for (std::size_t i = 0; i < eligible.size(); ++i)
        eligible[i] = labels.labels[i] != CellLabel::excluded &&
                      !features.cells[i].empty_mass;

    ExperimentReport report;
    report.dim = features.kind == FeatureKind::smer ? 1 : features.dim;
    report.runs.resize(config.n_runs);

    parallel_for(config.n_runs, config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            try {
                std::uint64_t rs = derive_seed(config.seed, r);
                RunRecord rec;
                rec.train_cells =
                    balanced_sample(labels, config.train_size, derive_seed(rs, 0), &eligible);
                std::vector<char> remaining = eligible;
                for (std::size_t c : rec.train_cells) remaining[c] = 0;
                rec.test_cells =
                    balanced_sample(labels, config.test_size, derive_seed(rs, 1), &remaining);

                Design train = build_design(features, labels, rec.train_cells);
                Design test = build_design(features, labels, rec.test_cells);

                std::vector<double> grid = config.cv_grid.empty()
                                               ? default_c_grid(train.n_rows())
                                               : config.cv_grid;
                CvResult cv = cross_validate_c(train, grid, config.cv_folds,
                                               derive_seed(rs, 2), config.fit_options);
                rec.chosen_c = cv.chosen_c;

                SagaOptions fit_opt = config.fit_options;
                fit_opt.seed = derive_seed(rs, 3);
                rec.fit = fit_saga(train, cv.chosen_c, fit_opt);
                rec.nonzero_count = rec.fit.nonzero.size();

                Rng tie_rng(derive_seed(rs, 4));
                std::vector<int> pred(test.n_rows()), actual(test.n_rows());
                for (std::size_t i = 0; i < test.n_rows(); ++i) {
                    pred[i] = classify(predict_proba_margin(test.margin(rec.fit.w, i)),
                                       tie_rng);
                    actual[i] = static_cast<int>(test.labels[i]);
                }
                rec.f1 = f1_score(pred, actual);
                report.runs[r] = std::move(rec);
            } catch (const ContractError& e) {
                throw ContractError("run " + std::to_string(r) + ": " + e.what());
            } catch (const SolverError& e) {
                throw SolverError("run " + std::to_string(r) + ": " + e.what());
            }
        }
    });

    std::vector<double> f1s, nnzs;
    std::vector<FitResult> fits;
    for (const RunRecord& rec : report.runs) {
        f1s.push_back(rec.f1);
        nnzs.push_back(static_cast<double>(rec.nonzero_count));
        fits.push_back(rec.fit);
    }
    report.mean_f1 = experiment_detail::mean_of(f1s);
    report.std_f1 = experiment_detail::sample_std(f1s, report.mean_f1);
    report.mean_nonzero = experiment_detail::mean_of(nnzs);
    report.median_nonzero = experiment_detail::median_of(nnzs);
    report.relevance = relevance_scores(fits);
    return report;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

// CSV body `run,f1,nonzero_count,chosen_c`, one row per run, followed by a
// comment-style summary footer. Values use 9 significant digits.
inline void write_experiment_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open report file for writing: " + path);
    out << "run,f1,nonzero_count,chosen_c\n";
    for (std::size_t r = 0; r < report.runs.size(); ++r) {
        const RunRecord& rec = report.runs[r];
        out << r << ',' << format_g9(rec.f1) << ',' << rec.nonzero_count << ','
            << format_g9(rec.chosen_c) << '\n';
    }
    out << "# mean_f1 " << format_g9(report.mean_f1) << '\n';
    out << "# std_f1 " << format_g9(report.std_f1) << '\n';
    out << "# mean_nonzero " << format_g9(report.mean_nonzero) << '\n';
    out << "# median_nonzero " << format_g9(report.median_nonzero) << '\n';
    out.flush();
    if (!out) throw IoError("failed writing report file: " + path);
}

// CSV `feature,phrase,mean_score,runs_selected`, one row per feature that was
// selected in at least one run, sorted by mean score descending (ties by
// feature index). `phrases[d]` names feature dimension d.
inline void write_relevance_csv(const RelevanceReport& relevance,
                                const std::vector<std::string>& phrases,
                                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open relevance file for writing: " + path);
    std::vector<std::uint32_t> order = relevance.union_set;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (relevance.mean_score[a] != relevance.mean_score[b])
            return relevance.mean_score[a] > relevance.mean_score[b];
        return a < b;
    });
    out << "feature,phrase,mean_score,runs_selected\n";
    for (std::uint32_t d : order) {
        if (d >= phrases.size())
            throw ContractError("no phrase for feature dimension " + std::to_string(d));
        out << d << ',' << phrases[d] << ',' << format_g9(relevance.mean_score[d])
            << ',' << relevance.runs_selected[d] << '\n';
    }
    out.flush();
    if (!out) throw IoError("failed writing relevance file: " + path);
}

}  // namespace rastercast
