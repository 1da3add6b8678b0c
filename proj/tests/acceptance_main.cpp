// Acceptance checks: one [PASS]/[FAIL] line per criterion, each with its
// runtime budget pinned in code. Exit code is the number of failed criteria.
//
//  1. gradient oracle      grad_smooth vs central finite differences
//  2. solver equivalence   SAGA vs full-batch proximal reference objective
//  3. aggregation oracle   truncated kernel aggregation vs brute force
//  4. formula spot checks  idf, kernel peak, loss at zero, degenerate F1
//  5. label thresholds     height -> dry / flooded / excluded mapping
//  6. end-to-end analogue  vector features beat a partial scalar query;
//                          zero signal collapses both to chance
//  7. sparsity behavior    appended noise stays mostly unselected; a grid
//                          value exists that zeroes every penalized weight
//  8. determinism          evaluate CSVs byte-identical across reruns and
//                          thread counts
//  9. stemmer conformance  published reference vectors
//
// Tolerances come from the criteria themselves and appear inline.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "rastercast/aggregate.hpp"
#include "rastercast/corpus.hpp"
#include "rastercast/experiment.hpp"
#include "rastercast/model.hpp"
#include "rastercast/porter.hpp"
#include "rastercast/raster.hpp"
#include "rastercast/rng.hpp"
#include "rastercast/synth.hpp"
#include "rastercast/text.hpp"

using namespace rastercast;

namespace {

std::vector<std::string> problems;

void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
}

template <typename T>
std::string str(T v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

int failed_criteria = 0;

void criterion(const std::string& name, double budget_s,
               const std::function<void()>& body) {
    problems.clear();
    auto t0 = std::chrono::steady_clock::now();
    try {
        body();
    } catch (const std::exception& e) {
        problems.push_back(std::string("exception: ") + e.what());
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count();
    if (budget_s > 0.0 && elapsed > budget_s)
        problems.push_back("runtime " + str(elapsed) + "s exceeds the " +
                           str(budget_s) + "s budget");
    char timing[64];
    if (budget_s > 0.0)
        std::snprintf(timing, sizeof timing, " (%.2fs, budget %.0fs)", elapsed, budget_s);
    else
        std::snprintf(timing, sizeof timing, " (%.2fs)", elapsed);
    if (problems.empty()) {
        std::printf("[PASS] %s%s\n", name.c_str(), timing);
    } else {
        ++failed_criteria;
        std::printf("[FAIL] %s%s\n", name.c_str(), timing);
        for (const std::string& p : problems) std::printf("       - %s\n", p.c_str());
    }
    std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Shared synthetic pipeline pieces
// ---------------------------------------------------------------------------

struct Pipeline {
    RasterGrid heights;
    LabelGrid labels;
    std::vector<GeoMessage> msgs;
    Vocabulary vocab;
    FeatureGrid tfidf;
    std::vector<std::string> signal_vocab;
};

// Scenario -> parsed corpus -> tokenized messages -> vocabulary -> tfidf grid.
Pipeline build_pipeline(const ScenarioSpec& spec, std::uint32_t min_df) {
    Pipeline p;
    GeneratedScenario scenario = generate(spec);
    p.heights = scenario.heights;
    p.labels = derive_labels(p.heights, kSynthFloodThreshold, kSynthPermanentThreshold);
    p.signal_vocab = scenario.signal_vocab;

    std::string corpus_path =
        (std::filesystem::temp_directory_path() /
         ("rastercast-accept-" + std::to_string(::getpid()) + "-" +
          std::to_string(spec.seed) + ".jsonl"))
            .string();
    { std::ofstream out(corpus_path); out << scenario.corpus_jsonl; }
    ParsedCorpus parsed = parse_corpus(corpus_path);
    std::filesystem::remove(corpus_path);

    CivilDate epoch = parse_date(spec.start_date);
    p.msgs.reserve(parsed.messages.size());
    std::vector<std::vector<std::string>> docs;
    for (const RawMessage& m : parsed.messages) {
        p.msgs.push_back(make_geo_message(m, epoch, preprocess(m.text)));
        docs.push_back(p.msgs.back().tokens);
    }
    p.vocab = build_vocabulary(docs, min_df);

    std::vector<SparseVector> rhos;
    rhos.reserve(docs.size());
    for (const auto& doc : docs) rhos.push_back(tfidf_vector(doc, p.vocab));
    AggregateConfig cfg;
    cfg.threads = 4;
    p.tfidf = aggregate_tfidf(p.heights, 0, p.msgs, rhos, p.vocab.size(), cfg);
    return p;
}

FeatureGrid build_smer(const Pipeline& p, const std::vector<std::string>& query) {
    std::vector<int> z(p.msgs.size());
    for (std::size_t i = 0; i < p.msgs.size(); ++i)
        z[i] = query_match(p.msgs[i].tokens, query);
    AggregateConfig cfg;
    cfg.threads = 4;
    return aggregate_smer(p.heights, 0, p.msgs, z, cfg);
}

ExperimentReport run_protocol(const LabelGrid& labels, const FeatureGrid& features,
                              std::uint64_t seed) {
    ExperimentConfig config;
    config.n_runs = 10;
    config.train_size = 2000;
    config.test_size = 400;
    config.cv_folds = 5;
    config.seed = seed;
    config.threads = 4;
    return run_experiment(config, labels, features);
}

// ---------------------------------------------------------------------------
// Subprocess helper for the determinism criterion
// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
    std::string cmd = std::string(RASTERCAST_CLI) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void gradient_oracle() {
    Rng rng(20240817);
    for (int instance = 0; instance < 50; ++instance) {
        std::size_t rows = 1 + rng.below(30);
        std::uint32_t dim = 1 + static_cast<std::uint32_t>(rng.below(10));
        Design d;
        d.dim = dim;
        for (std::size_t i = 0; i < rows; ++i) {
            SparseVector x;
            x.dim = dim;
            for (std::uint32_t j = 0; j < dim; ++j)
                if (rng.unit() < 0.7) x.push(j, (rng.unit() - 0.5) * 4.0);
            d.add_row(x, static_cast<int>(rng.below(2)));
        }
        std::vector<double> w(dim + 1u);
        for (double& v : w) v = (rng.unit() - 0.5) * 2.0;

        std::vector<double> g = grad_smooth(w, d);
        const double h = 1e-6;
        double err2 = 0.0, norm2 = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            std::vector<double> wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            double fd = (loss(wp, d, 0.0) - loss(wm, d, 0.0)) / (2.0 * h);
            err2 += (fd - g[j]) * (fd - g[j]);
            norm2 += g[j] * g[j];
        }
        double rel = std::sqrt(err2) / std::max(std::sqrt(norm2), 1e-8);
        expect(rel < 1e-5, "instance " + str(instance) + ": relative error " +
                               str(rel) + " >= 1e-5");
    }
}

void solver_equivalence() {
    const double cs[] = {1e-3, 1e-1, 10.0};
    for (int instance = 0; instance < 10; ++instance) {
        // Overlapping class blobs: noise wider than the class separation
        // keeps the unpenalized optimum finite.
        Rng rng(900 + instance);
        Design d;
        d.dim = 10;
        for (std::size_t i = 0; i < 200; ++i) {
            int y = static_cast<int>(i % 2);
            SparseVector x;
            x.dim = 10;
            for (std::uint32_t j = 0; j < 10; ++j) {
                double center = (y == 1 ? 0.5 : -0.5);
                x.push(j, center + (rng.unit() - 0.5) * 4.0);
            }
            d.add_row(x, y);
        }
        for (double c : cs) {
            SagaOptions opts;
            opts.max_epochs = 200000;
            opts.tol = 1e-11;
            opts.seed = derive_seed(77, static_cast<std::uint64_t>(instance));
            FitResult saga = fit_saga(d, c, opts);
            FitResult ref = fit_reference(d, c);
            double rel = std::abs(saga.loss - ref.loss) / std::abs(ref.loss);
            expect(rel < 1e-6, "instance " + str(instance) + ", c " + str(c) +
                                   ": objectives " + str(saga.loss) + " vs " +
                                   str(ref.loss) + " differ by " + str(rel));
        }
    }
}

void aggregation_oracle() {
    Georef g;
    g.n_rows = 50;
    g.n_cols = 50;
    g.origin_lon = 0.0;
    g.origin_lat = 0.0;
    g.resolution = 0.01;

    Rng rng(4242);
    const std::uint32_t dim = 20;
    std::vector<GeoMessage> msgs(1000);
    std::vector<int> z(msgs.size());
    std::vector<SparseVector> rhos(msgs.size());
    for (std::size_t i = 0; i < msgs.size(); ++i) {
        msgs[i].s = {rng.unit() * 0.5, rng.unit() * 0.5};
        // Log-uniform dispersion in [0.01, 0.05] degrees: wide enough that
        // every cell collects solid in-radius mass, making the truncation
        // tail the only difference between the two computations.
        msgs[i].d = 0.01 * std::pow(5.0, rng.unit());
        msgs[i].t = 0;
        z[i] = static_cast<int>(rng.below(2));
        SparseVector& v = rhos[i];
        v.dim = dim;
        for (int k = 0; k < 3; ++k)
            v.push(static_cast<std::uint32_t>(rng.below(dim)), rng.unit());
        v.normalize();
    }

    AggregateConfig truncated;  // default radius: 8 dispersions
    truncated.threads = 2;
    AggregateConfig brute;
    brute.truncation_radius = std::nullopt;
    brute.threads = 2;

    FeatureGrid st = aggregate_smer(g, 0, msgs, z, truncated);
    FeatureGrid sb = aggregate_smer(g, 0, msgs, z, brute);
    double max_smer = 0.0;
    std::size_t empty = 0;
    for (std::size_t i = 0; i < st.cells.size(); ++i) {
        if (st.cells[i].empty_mass) ++empty;
        max_smer = std::max(max_smer, std::abs(st.cells[i].smer - sb.cells[i].smer));
    }
    expect(empty == 0, str(empty) + " cells lost all mass under truncation");
    expect(max_smer < 1e-6, "max |smer difference| " + str(max_smer) + " >= 1e-6");

    FeatureGrid vt = aggregate_tfidf(g, 0, msgs, rhos, dim, truncated);
    FeatureGrid vb = aggregate_tfidf(g, 0, msgs, rhos, dim, brute);
    double max_dim = 0.0;
    for (std::size_t i = 0; i < vt.cells.size(); ++i) {
        std::vector<double> a(dim, 0.0), b(dim, 0.0);
        const SparseVector& xa = vt.cells[i].tfidf;
        const SparseVector& xb = vb.cells[i].tfidf;
        for (std::size_t k = 0; k < xa.idx.size(); ++k) a[xa.idx[k]] = xa.val[k];
        for (std::size_t k = 0; k < xb.idx.size(); ++k) b[xb.idx[k]] = xb.val[k];
        for (std::uint32_t j = 0; j < dim; ++j)
            max_dim = std::max(max_dim, std::abs(a[j] - b[j]));
    }
    expect(max_dim < 1e-6, "max per-dimension |tfidf difference| " + str(max_dim) +
                               " >= 1e-6");
}

void formula_spot_checks() {
    double idf = idf_value(3, 1);
    expect(std::abs(idf - 1.6931471805599453) < 1e-9,
           "idf(N=3, N_v=1) = " + str(idf) + ", want ln(2)+1");

    double k = gaussian_kernel({1.5, -2.0}, {1.5, -2.0}, 1.0);
    expect(std::abs(k - 0.3989422804014327) < 1e-9,
           "kernel at zero distance, d=1: " + str(k) + ", want (2*pi)^-1/2");

    Rng rng(7);
    Design d;
    d.dim = 4;
    for (std::size_t i = 0; i < 25; ++i) {
        SparseVector x;
        x.dim = 4;
        for (std::uint32_t j = 0; j < 4; ++j) x.push(j, rng.unit());
        d.add_row(x, static_cast<int>(rng.below(2)));
    }
    std::vector<double> zeros(5, 0.0);
    double l = loss(zeros, d, 0.0);
    double want = 25.0 * std::numbers::ln2;
    expect(std::abs(l - want) / want < 1e-12,
           "loss at w=0 is " + str(l) + ", want n*ln(2) = " + str(want));

    std::vector<int> pred(40, 1), actual(40);
    for (std::size_t i = 0; i < actual.size(); ++i) actual[i] = i < 20 ? 1 : 0;
    double f1 = f1_score(pred, actual);
    expect(std::abs(f1 - 2.0 / 3.0) < 1e-12,
           "all-positive F1 on balanced labels is " + str(f1) + ", want 2/3");
}

void label_thresholds() {
    RasterGrid heights;
    heights.n_rows = 1;
    heights.n_cols = 6;
    heights.resolution = 1.0;
    heights.values = {0.1, 0.2, 0.3, 9.9, 10.0, 999.0};
    LabelGrid lg = derive_labels(heights, 0.2, 10.0);
    const CellLabel want[] = {CellLabel::dry,     CellLabel::dry,
                              CellLabel::flooded, CellLabel::flooded,
                              CellLabel::excluded, CellLabel::excluded};
    const char* names[] = {"dry", "flooded", "excluded"};
    for (std::size_t i = 0; i < 6; ++i)
        expect(lg.labels[i] == want[i],
               "height " + str(heights.values[i]) + " labeled " +
                   names[static_cast<int>(lg.labels[i])] + ", want " +
                   names[static_cast<int>(want[i])]);
}

// Built by the end-to-end criterion, reused by the sparsity criterion.
Pipeline signal_pipeline;

void end_to_end() {
    ScenarioSpec spec;  // 100x100, flood 0.2, 5000 messages, 20/480 vocab
    spec.signal_strength = 0.6;
    spec.seed = 20170815;
    signal_pipeline = build_pipeline(spec, 10);
    Pipeline& p = signal_pipeline;
    expect(p.vocab.size() >= 400,
           "vocabulary collapsed to " + str(p.vocab.size()) + " phrases");

    ExperimentReport tfidf = run_protocol(p.labels, p.tfidf, 101);
    std::vector<std::string> query(p.signal_vocab.begin(), p.signal_vocab.begin() + 5);
    ExperimentReport smer = run_protocol(p.labels, build_smer(p, query), 102);

    expect(tfidf.mean_f1 >= 0.80,
           "vector-feature mean F1 " + str(tfidf.mean_f1) + " < 0.80");
    expect(tfidf.mean_f1 > smer.mean_f1,
           "vector-feature mean F1 " + str(tfidf.mean_f1) +
               " does not beat the 5-of-20 scalar query's " + str(smer.mean_f1));

    ScenarioSpec null_spec = spec;
    null_spec.signal_strength = 0.0;
    null_spec.seed = 20170816;
    Pipeline np = build_pipeline(null_spec, 10);
    ExperimentReport null_tfidf = run_protocol(np.labels, np.tfidf, 103);
    ExperimentReport null_smer = run_protocol(np.labels, build_smer(np, query), 104);
    expect(null_tfidf.mean_f1 >= 0.45 && null_tfidf.mean_f1 <= 0.55,
           "zero-signal vector mean F1 " + str(null_tfidf.mean_f1) +
               " outside [0.45, 0.55]; known deviation: the zero-signal corpus"
               " carries no token-level label information (permuting labels on"
               " the same features scores ~0.51), but at this sampling density"
               " (2400 of ~10000 cells) a linear model matches each test cell"
               " to adjacent training cells through kernel-shared features and"
               " copies the label of their common blob — see README");
    expect(null_smer.mean_f1 >= 0.45 && null_smer.mean_f1 <= 0.55,
           "zero-signal scalar mean F1 " + str(null_smer.mean_f1) +
               " outside [0.45, 0.55]");
}

void sparsity_behavior() {
    Pipeline& p = signal_pipeline;
    if (p.tfidf.cells.empty()) {
        problems.push_back("end-to-end pipeline unavailable");
        return;
    }

    // Append 200 pure-noise dimensions to every cell's feature vector.
    const std::uint32_t base = p.tfidf.dim;
    const std::uint32_t extra = 200;
    FeatureGrid noisy = p.tfidf;
    noisy.dim = base + extra;
    Rng rng(5150);
    for (CellFeatures& cell : noisy.cells) {
        if (cell.empty_mass) continue;
        cell.tfidf.dim = noisy.dim;
        for (std::uint32_t k = 0; k < extra; ++k)
            cell.tfidf.push(base + k, rng.unit() * 0.05);
    }

    std::vector<char> eligible(p.labels.labels.size(), 0);
    for (std::size_t i = 0; i < eligible.size(); ++i)
        eligible[i] = p.labels.labels[i] != CellLabel::excluded &&
                      !noisy.cells[i].empty_mass;
    std::vector<std::size_t> cells = balanced_sample(p.labels, 2000, 31337, &eligible);
    Design design = build_design(noisy, p.labels, cells);

    CvResult cv = cross_validate_c(design, default_c_grid(design.n_rows()), 5, 808);
    FitResult fit = fit_saga(design, cv.chosen_c, {.seed = 909});
    double share = static_cast<double>(fit.nonzero.size()) /
                   static_cast<double>(noisy.dim);
    expect(share < 0.5, "model keeps " + str(fit.nonzero.size()) + " of " +
                            str(noisy.dim) + " features (" + str(share * 100) +
                            "%), want < 50%");

    // Soft-threshold check: above the max absolute smooth gradient at w = 0,
    // every penalized coefficient stays exactly zero.
    std::vector<double> g = grad_smooth(std::vector<double>(noisy.dim + 1u, 0.0), design);
    double c_max = 0.0;
    for (std::size_t j = 1; j < g.size(); ++j) c_max = std::max(c_max, std::abs(g[j]));
    FitResult zero_fit = fit_saga(design, c_max * 1.01, {.seed = 910});
    expect(zero_fit.nonzero.empty(),
           str(zero_fit.nonzero.size()) + " coefficients survive c just above " +
               str(c_max));

    double grid_top = default_c_grid(design.n_rows()).back();
    expect(grid_top >= c_max, "largest grid value " + str(grid_top) +
                                  " sits below the zeroing threshold " + str(c_max));
    FitResult grid_fit = fit_saga(design, grid_top, {.seed = 911});
    expect(grid_fit.nonzero.empty(),
           "largest grid value leaves " + str(grid_fit.nonzero.size()) +
               " coefficients nonzero");
}

void determinism() {
    std::filesystem::path dir =
        std::filesystem::temp_directory_path() /
        ("rastercast-accept-det-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    auto at = [&](const std::string& name) { return (dir / name).string(); };

    {
        std::ofstream spec(at("spec.txt"));
        spec << "rows = 40\ncols = 40\nflood_fraction = 0.3\nmessages = 1200\n"
             << "signal_strength = 0.7\nsignal_vocab = 8\nnoise_vocab = 60\n"
             << "seed = 33\n";
    }
    expect(run_cli("synth --spec " + at("spec.txt") + " --out " + at("scene")) == 0,
           "synth failed");
    expect(run_cli("featurize --corpus " + at("scene/corpus.jsonl") + " --grid " +
                   at("scene/heights.asc") +
                   " --day 2017-08-15 --family tfidf --min-df 5 --out " +
                   at("feat")) == 0,
           "featurize failed");

    std::string common = "evaluate --features " + at("feat/features.txt") +
                         " --grid " + at("scene/heights.asc") +
                         " --runs 5 --train-size 300 --test-size 150 --seed 13";
    for (const char* run : {"t1", "t4", "t1b"}) {
        std::string threads = (std::string(run) == "t4") ? "4" : "1";
        expect(run_cli(common + " --threads " + threads + " --out " + at(run)) == 0,
               std::string("evaluate run ") + run + " failed");
    }
    std::string base_report = slurp(at("t1/report.csv"));
    expect(!base_report.empty(), "report.csv is empty");
    expect(base_report == slurp(at("t4/report.csv")),
           "report.csv differs between --threads 1 and --threads 4");
    expect(base_report == slurp(at("t1b/report.csv")),
           "report.csv differs between reruns with the same seed");
    expect(slurp(at("t1/relevance.csv")) == slurp(at("t4/relevance.csv")),
           "relevance.csv differs between --threads 1 and --threads 4");
    expect(slurp(at("t1/relevance.csv")) == slurp(at("t1b/relevance.csv")),
           "relevance.csv differs between reruns with the same seed");

    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
}

void stemmer_conformance() {
    // The motivating inflection family first.
    const std::pair<const char*, const char*> family[] = {
        {"flood", "flood"}, {"flooding", "flood"}, {"flooded", "flood"}};
    // Thirty words from the algorithm's published worked examples.
    const std::pair<const char*, const char*> sample[] = {
        {"caresses", "caress"},   {"ponies", "poni"},
        {"ties", "ti"},           {"caress", "caress"},
        {"cats", "cat"},          {"feed", "feed"},
        {"agreed", "agre"},       {"plastered", "plaster"},
        {"bled", "bled"},         {"motoring", "motor"},
        {"sing", "sing"},         {"conflated", "conflat"},
        {"troubled", "troubl"},   {"sized", "size"},
        {"hopping", "hop"},       {"tanned", "tan"},
        {"falling", "fall"},      {"hissing", "hiss"},
        {"fizzed", "fizz"},       {"failing", "fail"},
        {"filing", "file"},       {"happy", "happi"},
        {"sky", "sky"},           {"relational", "relat"},
        {"conditional", "condit"}, {"rational", "ration"},
        {"valenci", "valenc"},    {"hesitanci", "hesit"},
        {"digitizer", "digit"},   {"operator", "oper"}};
    for (const auto& [word, want] : family) {
        std::string got = porter_stem(word);
        expect(got == want, std::string(word) + " -> " + got + ", want " + want);
    }
    for (const auto& [word, want] : sample) {
        std::string got = porter_stem(word);
        expect(got == want, std::string(word) + " -> " + got + ", want " + want);
    }
}

}  // namespace

int main() {
    criterion("gradient oracle: 50 finite-difference instances", 5.0, gradient_oracle);
    criterion("solver equivalence: SAGA vs proximal reference on 10 instances x 3 penalties",
              30.0, solver_equivalence);
    criterion("aggregation oracle: truncated vs brute force on 50x50 with 1000 messages",
              60.0, aggregation_oracle);
    criterion("formula spot checks: idf, kernel peak, loss at zero, degenerate F1",
              0.0, formula_spot_checks);
    criterion("label thresholds: {0.1, 0.2, 0.3, 9.9, 10, 999}", 0.0, label_thresholds);
    criterion("end-to-end: vector features reach 0.80 F1 and beat a 5-of-20 scalar query",
              180.0, end_to_end);
    criterion("sparsity: appended noise mostly unselected; a grid value zeroes all weights",
              120.0, sparsity_behavior);
    criterion("determinism: evaluate CSVs byte-identical across reruns and threads",
              0.0, determinism);
    criterion("stemmer conformance: published reference vectors", 0.0,
              stemmer_conformance);

    if (failed_criteria == 0)
        std::printf("all 9 acceptance criteria passed\n");
    else
        std::printf("%d of 9 acceptance criteria FAILED\n", failed_criteria);
    return failed_criteria;
}
