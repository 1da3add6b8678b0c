#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "rastercast/experiment.hpp"

using namespace rastercast;
using Catch::Matchers::WithinAbs;

namespace {

Georef small_georef() { return Georef{20, 20, -95.0, 29.0, 0.01}; }

// 20x20 grid: flooded on the left half, dry on the right, with a handful of
// excluded and empty-mass cells sprinkled in.
struct Scenario {
    LabelGrid labels;
    FeatureGrid features;
};

Scenario make_scenario(std::uint64_t seed, FeatureKind kind, double signal) {
    Scenario sc;
    static_cast<Georef&>(sc.labels) = small_georef();
    sc.labels.labels.assign(400, CellLabel::dry);
    sc.features.georef = small_georef();
    sc.features.kind = kind;
    sc.features.dim = kind == FeatureKind::smer ? 1 : 6;
    sc.features.cells.resize(400);

    Rng rng(seed);
    for (std::size_t cell = 0; cell < 400; ++cell) {
        std::size_t row = cell / 20, col = cell % 20;
        bool flooded = col < 10;
        sc.labels.labels[cell] = flooded ? CellLabel::flooded : CellLabel::dry;
        if (cell % 97 == 0) sc.labels.labels[cell] = CellLabel::excluded;

        CellFeatures& f = sc.features.cells[cell];
        f.row = row;
        f.col = col;
        f.day = 0;
        f.mass = 1.0;
        f.empty_mass = cell % 89 == 0;
        if (kind == FeatureKind::smer) {
            double base = signal == 0.0 ? 0.5 : (flooded ? 0.5 + 0.3 * signal : 0.5 - 0.3 * signal);
            f.smer = std::clamp(base + (rng.unit() - 0.5) * 0.2 * signal, 0.0, 1.0);
        } else {
            SparseVector v;
            v.dim = 6;
            if (signal == 0.0) {
                v.push(4, 1.0);  // every cell identical
            } else {
                // all cells share the same support; the classes differ only by
                // a randomly sized boost, so some cells stay ambiguous
                double boost = signal * rng.unit();
                v.push(0, 0.3 + 0.5 * rng.unit() + (flooded ? boost : 0.0));
                v.push(1, 0.2 + 0.4 * rng.unit() + (flooded ? boost * 0.5 : 0.0));
                v.push(2, 0.3 + 0.5 * rng.unit() + (flooded ? 0.0 : boost));
                v.push(3, 0.2 + 0.4 * rng.unit() + (flooded ? 0.0 : boost * 0.5));
                v.push(4, rng.unit() * 0.4);
                v.push(5, rng.unit() * 0.4);
                v.normalize();
            }
            f.tfidf = v;
        }
    }
    return sc;
}

ExperimentConfig small_config(std::uint64_t seed, std::size_t runs = 5) {
    ExperimentConfig cfg;
    cfg.n_runs = runs;
    cfg.train_size = 40;
    cfg.test_size = 20;
    cfg.cv_folds = 5;
    cfg.cv_grid = {0.4, 4.0, 40.0};
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("balanced_sample draws exact class halves without replacement") {
    LabelGrid labels;
    static_cast<Georef&>(labels) = Georef{10, 10, 0.0, 0.0, 1.0};
    labels.labels.assign(100, CellLabel::dry);
    for (std::size_t i = 0; i < 30; ++i) labels.labels[i] = CellLabel::flooded;
    for (std::size_t i = 80; i < 100; ++i) labels.labels[i] = CellLabel::excluded;

    std::vector<std::size_t> sample = balanced_sample(labels, 40, 7);
    REQUIRE(sample.size() == 40);
    CHECK(std::is_sorted(sample.begin(), sample.end()));
    CHECK(std::adjacent_find(sample.begin(), sample.end()) == sample.end());
    std::size_t flooded = 0, dry = 0;
    for (std::size_t c : sample) {
        REQUIRE(labels.labels[c] != CellLabel::excluded);
        (labels.labels[c] == CellLabel::flooded ? flooded : dry)++;
    }
    CHECK(flooded == 20);
    CHECK(dry == 20);

    CHECK(balanced_sample(labels, 40, 7) == sample);   // same seed
    CHECK(balanced_sample(labels, 40, 8) != sample);   // different stream
}

TEST_CASE("balanced_sample exhausts a class when it exactly fits") {
    LabelGrid labels;
    static_cast<Georef&>(labels) = Georef{3, 3, 0.0, 0.0, 1.0};
    labels.labels.assign(9, CellLabel::dry);
    labels.labels[2] = CellLabel::flooded;
    labels.labels[7] = CellLabel::flooded;
    std::vector<std::size_t> sample = balanced_sample(labels, 4, 123);
    CHECK(std::count(sample.begin(), sample.end(), 2) == 1);
    CHECK(std::count(sample.begin(), sample.end(), 7) == 1);
}

TEST_CASE("balanced_sample honors the eligibility mask and its contracts") {
    LabelGrid labels;
    static_cast<Georef&>(labels) = Georef{4, 4, 0.0, 0.0, 1.0};
    labels.labels.assign(16, CellLabel::dry);
    for (std::size_t i = 0; i < 8; ++i) labels.labels[i] = CellLabel::flooded;

    std::vector<char> eligible(16, 1);
    eligible[0] = eligible[1] = eligible[8] = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> s = balanced_sample(labels, 8, 50 + trial, &eligible);
        for (std::size_t c : s) CHECK(eligible[c] == 1);
    }

    CHECK_THROWS_AS(balanced_sample(labels, 7, 1), ContractError);   // odd
    CHECK_THROWS_AS(balanced_sample(labels, 0, 1), ContractError);
    CHECK_THROWS_AS(balanced_sample(labels, 18, 1), ContractError);  // too few per class
    std::vector<char> bad_mask(5, 1);
    CHECK_THROWS_AS(balanced_sample(labels, 4, 1, &bad_mask), ContractError);
}

TEST_CASE("build_design renormalizes tfidf rows and rejects excluded cells") {
    Scenario sc = make_scenario(3, FeatureKind::tfidf, 1.0);
    // de-normalize one cell on purpose; the design must restore unit length
    sc.features.cells[21].tfidf.val[0] *= 3.0;
    Design d = build_design(sc.features, sc.labels, {21, 22});
    double sq = 0.0;
    for (std::size_t k = d.row_ptr[0]; k < d.row_ptr[1]; ++k)
        sq += d.values[k] * d.values[k];
    CHECK_THAT(std::sqrt(sq), WithinAbs(1.0, 1e-12));
    CHECK(d.dim == 6);

    std::size_t excluded_cell = 0;  // cell 0 is excluded (0 % 97 == 0)
    REQUIRE(sc.labels.labels[excluded_cell] == CellLabel::excluded);
    CHECK_THROWS_AS(build_design(sc.features, sc.labels, {excluded_cell}), ContractError);

    Scenario sm = make_scenario(3, FeatureKind::smer, 1.0);
    Design ds = build_design(sm.features, sm.labels, {21, 22});
    CHECK(ds.dim == 1);
}

TEST_CASE("run_experiment keeps train and test disjoint and balanced") {
    Scenario sc = make_scenario(11, FeatureKind::tfidf, 1.0);
    ExperimentReport rep = run_experiment(small_config(5), sc.labels, sc.features);
    REQUIRE(rep.runs.size() == 5);
    for (const RunRecord& rec : rep.runs) {
        std::set<std::size_t> train(rec.train_cells.begin(), rec.train_cells.end());
        for (std::size_t c : rec.test_cells) CHECK(train.count(c) == 0);
        CHECK(rec.train_cells.size() == 40);
        CHECK(rec.test_cells.size() == 20);
        for (std::size_t c : rec.test_cells) {
            CHECK(sc.labels.labels[c] != CellLabel::excluded);
            CHECK_FALSE(sc.features.cells[c].empty_mass);
        }
    }
}

TEST_CASE("a single run equals a hand-driven pipeline pass") {
    Scenario sc = make_scenario(13, FeatureKind::tfidf, 1.0);
    ExperimentConfig cfg = small_config(42, 1);
    ExperimentReport rep = run_experiment(cfg, sc.labels, sc.features);

    // replay the protocol by hand with the documented seed derivations
    std::vector<char> eligible(400, 0);
    for (std::size_t i = 0; i < 400; ++i)
        eligible[i] = sc.labels.labels[i] != CellLabel::excluded &&
                      !sc.features.cells[i].empty_mass;
    std::uint64_t rs = derive_seed(42, 0);
    std::vector<std::size_t> train_cells =
        balanced_sample(sc.labels, 40, derive_seed(rs, 0), &eligible);
    std::vector<char> remaining = eligible;
    for (std::size_t c : train_cells) remaining[c] = 0;
    std::vector<std::size_t> test_cells =
        balanced_sample(sc.labels, 20, derive_seed(rs, 1), &remaining);
    Design train = build_design(sc.features, sc.labels, train_cells);
    Design test = build_design(sc.features, sc.labels, test_cells);
    CvResult cv = cross_validate_c(train, cfg.cv_grid, 5, derive_seed(rs, 2));
    SagaOptions fit_opt;
    fit_opt.seed = derive_seed(rs, 3);
    FitResult fit = fit_saga(train, cv.chosen_c, fit_opt);
    Rng tie_rng(derive_seed(rs, 4));
    std::vector<int> pred, actual;
    for (std::size_t i = 0; i < test.n_rows(); ++i) {
        pred.push_back(classify(predict_proba_margin(test.margin(fit.w, i)), tie_rng));
        actual.push_back(static_cast<int>(test.labels[i]));
    }

    CHECK(rep.runs[0].train_cells == train_cells);
    CHECK(rep.runs[0].test_cells == test_cells);
    CHECK(rep.runs[0].chosen_c == cv.chosen_c);
    CHECK(rep.runs[0].fit.w == fit.w);
    CHECK(rep.runs[0].f1 == f1_score(pred, actual));
    CHECK(rep.mean_f1 == rep.runs[0].f1);
    CHECK(rep.std_f1 == 0.0);
}

TEST_CASE("reports are deterministic and thread-count independent") {
    Scenario sc = make_scenario(17, FeatureKind::tfidf, 1.0);
    ExperimentConfig cfg = small_config(9);
    ExperimentReport a = run_experiment(cfg, sc.labels, sc.features);
    ExperimentReport b = run_experiment(cfg, sc.labels, sc.features);
    cfg.threads = 4;
    ExperimentReport c = run_experiment(cfg, sc.labels, sc.features);
    for (std::size_t r = 0; r < a.runs.size(); ++r) {
        CHECK(a.runs[r].f1 == b.runs[r].f1);
        CHECK(a.runs[r].f1 == c.runs[r].f1);
        CHECK(a.runs[r].fit.w == c.runs[r].fit.w);
        CHECK(a.runs[r].chosen_c == c.runs[r].chosen_c);
    }
    CHECK(a.mean_f1 == c.mean_f1);
    CHECK(a.relevance.mean_score == c.relevance.mean_score);
}

TEST_CASE("report aggregates match recomputation from per-run values") {
    Scenario sc = make_scenario(19, FeatureKind::tfidf, 0.8);
    ExperimentReport rep = run_experiment(small_config(31, 7), sc.labels, sc.features);

    std::vector<double> f1s, nnzs;
    for (const RunRecord& rec : rep.runs) {
        f1s.push_back(rec.f1);
        nnzs.push_back(static_cast<double>(rec.nonzero_count));
    }
    double mean = 0.0;
    for (double v : f1s) mean += v;
    mean /= static_cast<double>(f1s.size());
    double ss = 0.0;
    for (double v : f1s) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(f1s.size() - 1));
    CHECK_THAT(rep.mean_f1, WithinAbs(mean, 1e-12));
    CHECK_THAT(rep.std_f1, WithinAbs(sd, 1e-12));

    std::sort(nnzs.begin(), nnzs.end());
    double mean_nnz = 0.0;
    for (double v : nnzs) mean_nnz += v;
    mean_nnz /= static_cast<double>(nnzs.size());
    CHECK_THAT(rep.mean_nonzero, WithinAbs(mean_nnz, 1e-12));
    CHECK_THAT(rep.median_nonzero, WithinAbs(nnzs[3], 1e-12));  // 7 runs: middle
}

TEST_CASE("informative features score high and no-signal features score at chance") {
    Scenario good = make_scenario(23, FeatureKind::tfidf, 1.0);
    ExperimentReport strong = run_experiment(small_config(3, 5), good.labels, good.features);
    CHECK(strong.mean_f1 > 0.8);

    Scenario flat = make_scenario(23, FeatureKind::tfidf, 0.0);
    ExperimentReport chance = run_experiment(small_config(3, 10), flat.labels, flat.features);
    INFO("chance-level mean F1 " << chance.mean_f1);
    CHECK(chance.mean_f1 > 0.4);
    CHECK(chance.mean_f1 < 0.6);

    Scenario smer = make_scenario(29, FeatureKind::smer, 1.0);
    ExperimentReport scalar = run_experiment(small_config(3, 5), smer.labels, smer.features);
    CHECK(scalar.mean_f1 > 0.8);
    CHECK(scalar.dim == 1);
}

TEST_CASE("seed changes shift per-run scores but not the big picture") {
    Scenario sc = make_scenario(37, FeatureKind::tfidf, 0.6);
    ExperimentReport a = run_experiment(small_config(100, 6), sc.labels, sc.features);
    ExperimentReport b = run_experiment(small_config(200, 6), sc.labels, sc.features);
    std::vector<double> fa, fb;
    for (auto& r : a.runs) fa.push_back(r.f1);
    for (auto& r : b.runs) fb.push_back(r.f1);
    CHECK(fa != fb);
    // overlapping mean +- std bands on a stable scenario
    CHECK(std::abs(a.mean_f1 - b.mean_f1) <= a.std_f1 + b.std_f1 + 0.05);
}

TEST_CASE("sampling failures carry the run index") {
    Scenario sc = make_scenario(41, FeatureKind::tfidf, 1.0);
    ExperimentConfig cfg = small_config(1, 2);
    cfg.train_size = 400;  // more than the eligible pool
    try {
        run_experiment(cfg, sc.labels, sc.features);
        FAIL("expected a sampling error");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("run ") != std::string::npos);
        CHECK(std::string(e.what()).find("sampling error") != std::string::npos);
    }
}

TEST_CASE("experiment csv lists runs and a summary footer") {
    testutil::TempDir tmp;
    ExperimentReport rep;
    rep.runs.resize(2);
    rep.runs[0].f1 = 0.5;
    rep.runs[0].nonzero_count = 3;
    rep.runs[0].chosen_c = 20.0;
    rep.runs[1].f1 = 0.75;
    rep.runs[1].nonzero_count = 2;
    rep.runs[1].chosen_c = 200.0;
    rep.mean_f1 = 0.625;
    rep.std_f1 = std::sqrt(0.03125);
    rep.mean_nonzero = 2.5;
    rep.median_nonzero = 2.5;

    auto path = tmp.file("report.csv");
    write_experiment_csv(rep, path);
    CHECK(testutil::read_file(path) ==
          "run,f1,nonzero_count,chosen_c\n"
          "0,0.5,3,20\n"
          "1,0.75,2,200\n"
          "# mean_f1 0.625\n"
          "# std_f1 0.176776695\n"
          "# mean_nonzero 2.5\n"
          "# median_nonzero 2.5\n");
}

TEST_CASE("relevance csv sorts selected features by mean score") {
    testutil::TempDir tmp;
    RelevanceReport rel;
    rel.mean_score = {0.5, 1.0, 0.0, 0.25};
    rel.union_set = {0, 1, 3};
    rel.intersection = {1};
    rel.runs_selected = {1, 2, 0, 1};
    std::vector<std::string> phrases = {"flood", "water", "dam", "rain"};

    auto path = tmp.file("relevance.csv");
    write_relevance_csv(rel, phrases, path);
    CHECK(testutil::read_file(path) ==
          "feature,phrase,mean_score,runs_selected\n"
          "1,water,1,2\n"
          "0,flood,0.5,1\n"
          "3,rain,0.25,1\n");

    std::vector<std::string> short_list = {"flood"};
    CHECK_THROWS_AS(write_relevance_csv(rel, short_list, tmp.file("r2.csv")),
                    ContractError);
}
