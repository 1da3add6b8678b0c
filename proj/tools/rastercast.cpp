// Command-line front end: synth | featurize | train | evaluate | predict.
// Exit codes: 0 success, 2 usage/contract/missing-input, 1 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rastercast/aggregate.hpp"
#include "rastercast/corpus.hpp"
#include "rastercast/error.hpp"
#include "rastercast/experiment.hpp"
#include "rastercast/fmt.hpp"
#include "rastercast/log.hpp"
#include "rastercast/model.hpp"
#include "rastercast/raster.hpp"
#include "rastercast/rng.hpp"
#include "rastercast/synth.hpp"
#include "rastercast/text.hpp"
#include "rastercast/version.hpp"

namespace {

using namespace rastercast;

// Water-height label thresholds (meters): above the first and below the
// second counts as flooded, at or above the second is permanent water.
constexpr double kFloodThreshold = 0.2;
constexpr double kPermanentThreshold = 10.0;

struct SynthArgs {
    std::string spec_file;
    std::string out_dir;
};

struct FeaturizeArgs {
    std::string corpus_file;
    std::string grid_file;
    std::string day;
    std::string family;
    std::string query;
    int ngrams_n = 1;
    int min_df = 10;
    double truncation = 8.0;
    unsigned threads = 0;
    std::string out_dir;
};

struct TrainArgs {
    std::string features_file;
    std::string grid_file;
    std::size_t train_size = 2000;
    int cv_folds = 5;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool no_penalize_intercept = false;
    std::string out_dir;
};

struct EvaluateArgs {
    std::string features_file;
    std::string grid_file;
    std::size_t runs = 20;
    std::size_t train_size = 20000;
    std::size_t test_size = 2000;
    int cv_folds = 5;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool no_penalize_intercept = false;
    std::string out_dir;
};

struct PredictArgs {
    std::string model_file;
    std::string features_file;
    std::string grid_file;
    unsigned threads = 0;
    std::string out_dir;
};

void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const nlohmann::json& inputs, const nlohmann::json& outputs,
                    const nlohmann::json& parameters) {
    nlohmann::json m;
    m["tool"] = "rastercast";
    m["version"] = kVersion;
    m["subcommand"] = subcommand;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["parameters"] = parameters;
    const std::string path = out_dir + "/manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot open manifest for writing: " + path);
    out << m.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("failed writing manifest: " + path);
}

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " +
                          ec.message());
}

BBox grid_bounds(const Georef& g) {
    return BBox{g.origin_lon, g.origin_lat,
                g.origin_lon + static_cast<double>(g.n_cols) * g.resolution,
                g.origin_lat + static_cast<double>(g.n_rows) * g.resolution};
}

void check_grid_match(const FeatureDump& dump, const Georef& g) {
    if (dump.n_rows != g.n_rows || dump.n_cols != g.n_cols)
        throw ContractError("feature dump was built on a " +
                            std::to_string(dump.n_rows) + "x" +
                            std::to_string(dump.n_cols) +
                            " grid but the raster is " + std::to_string(g.n_rows) +
                            "x" + std::to_string(g.n_cols));
}

// The dump's vocabulary path is stored relative to the dump file itself.
std::string resolve_vocab_path(const std::string& dump_path,
                               const std::string& vocab_file) {
    std::filesystem::path v(vocab_file);
    if (v.is_absolute()) return vocab_file;
    return (std::filesystem::path(dump_path).parent_path() / v).string();
}

// Rebuild the dense per-cell feature grid from a dump. `dim` overrides the
// dump's inferred dimensionality (the vocabulary is authoritative for tfidf).
FeatureGrid grid_from_dump(const FeatureDump& dump, const Georef& g,
                           std::uint32_t dim) {
    check_grid_match(dump, g);
    FeatureGrid fg;
    fg.georef = g;
    fg.kind = dump.kind;
    fg.dim = dim;
    fg.cells.resize(g.size());
    for (std::size_t cell = 0; cell < fg.cells.size(); ++cell) {
        fg.cells[cell].row = cell / g.n_cols;
        fg.cells[cell].col = cell % g.n_cols;
    }
    std::optional<int> day;
    for (const FeatureDumpEntry& e : dump.entries) {
        if (day && *day != e.day)
            throw ContractError("feature dump spans days " + std::to_string(*day) +
                                " and " + std::to_string(e.day) +
                                "; expected a single day");
        day = e.day;
        CellFeatures& f = fg.cells[g.index(e.row, e.col)];
        f.day = e.day;
        f.mass = e.mass;
        f.empty_mass = false;
        f.smer = e.smer;
        f.tfidf = e.tfidf;
        f.tfidf.dim = dim;
    }
    fg.day = day.value_or(0);
    return fg;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

void cmd_synth(const SynthArgs& args) {
    ScenarioSpec spec = parse_scenario_spec(args.spec_file);
    GeneratedScenario scenario = generate(spec);
    ensure_out_dir(args.out_dir);
    const std::string raster_path = args.out_dir + "/heights.asc";
    const std::string corpus_path = args.out_dir + "/corpus.jsonl";
    write_scenario(scenario, raster_path, corpus_path);
    log::info("wrote " + raster_path + " and " + corpus_path);

    nlohmann::json params;
    params["rows"] = spec.n_rows;
    params["cols"] = spec.n_cols;
    params["origin_lon"] = spec.origin_lon;
    params["origin_lat"] = spec.origin_lat;
    params["resolution"] = spec.resolution;
    params["flood_fraction"] = spec.flood_fraction;
    params["messages"] = spec.n_messages;
    params["signal_strength"] = spec.signal_strength;
    params["signal_vocab"] = spec.signal_vocab;
    params["noise_vocab"] = spec.noise_vocab;
    params["dispersion_min"] = spec.dispersion_min;
    params["dispersion_max"] = spec.dispersion_max;
    params["point_share"] = spec.point_share;
    params["days"] = spec.n_days;
    params["start_date"] = spec.start_date;
    params["seed"] = spec.seed;
    write_manifest(args.out_dir, "synth", {{"spec", args.spec_file}},
                   {{"heights", raster_path}, {"corpus", corpus_path}}, params);
}

// ---------------------------------------------------------------------------
// featurize
// ---------------------------------------------------------------------------

std::vector<std::string> parse_query(const std::string& query,
                                     const StopwordSet& stopwords) {
    std::vector<std::string> phrases;
    std::size_t start = 0;
    while (start <= query.size()) {
        std::size_t comma = query.find(',', start);
        std::string raw = query.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        start = comma == std::string::npos ? query.size() + 1 : comma + 1;
        std::vector<std::string> toks = preprocess(raw, stopwords);
        if (toks.empty()) {
            if (!raw.empty())
                throw ContractError("query phrase '" + raw +
                                    "' vanishes in preprocessing");
            continue;
        }
        if (toks.size() > 2)
            throw ContractError("query phrase '" + raw +
                                "' reduces to more than two tokens");
        std::string joined = toks[0];
        if (toks.size() == 2) joined += ' ' + toks[1];
        phrases.push_back(joined);
    }
    if (phrases.empty()) throw ContractError("query contains no usable phrase");
    return phrases;
}

void cmd_featurize(const FeaturizeArgs& args) {
    const bool smer = args.family == "smer";
    if (smer && args.query.empty())
        throw ContractError("--family smer requires --query");
    if (!smer && !args.query.empty())
        throw ContractError("--family tfidf does not take --query");
    if (args.truncation < 0.0)
        throw ContractError("--truncation must be nonnegative (0 disables)");
    if (args.min_df < 0) throw ContractError("--min-df must be nonnegative");

    RasterGrid raster = load_raster(args.grid_file);
    const Georef& georef = raster;
    CivilDate epoch = parse_date(args.day);

    ParsedCorpus parsed = parse_corpus(args.corpus_file);
    std::vector<RawMessage> kept =
        filter_corpus(parsed.messages, grid_bounds(georef), epoch, 0, 0);
    if (kept.empty())
        throw ContractError("no messages on " + args.day + " within the grid");
    log::info("kept " + std::to_string(kept.size()) + " of " +
              std::to_string(parsed.messages.size()) + " messages");

    const StopwordSet& stopwords = default_stopword_set();
    std::vector<GeoMessage> msgs;
    msgs.reserve(kept.size());
    for (const RawMessage& m : kept)
        msgs.push_back(make_geo_message(m, epoch, preprocess(m.text, stopwords)));

    AggregateConfig cfg;
    cfg.truncation_radius = args.truncation > 0.0
                                ? std::optional<double>(args.truncation)
                                : std::nullopt;
    cfg.threads = static_cast<int>(args.threads);

    ensure_out_dir(args.out_dir);
    const std::string features_path = args.out_dir + "/features.txt";
    FeatureDump dump;
    nlohmann::json outputs;
    outputs["features"] = features_path;

    if (smer) {
        std::vector<std::string> query = parse_query(args.query, stopwords);
        std::vector<int> z(msgs.size());
        for (std::size_t i = 0; i < msgs.size(); ++i)
            z[i] = query_match(msgs[i].tokens, query);
        append_to_dump(dump, aggregate_smer(georef, 0, msgs, z, cfg));
    } else {
        std::vector<std::vector<std::string>> docs;
        docs.reserve(msgs.size());
        for (const GeoMessage& m : msgs)
            docs.push_back(ngrams(m.tokens, args.ngrams_n));
        Vocabulary vocab =
            build_vocabulary(docs, static_cast<std::uint32_t>(args.min_df));
        const std::string vocab_path = args.out_dir + "/vocab.txt";
        write_vocabulary(vocab, vocab_path);
        outputs["vocabulary"] = vocab_path;
        log::info("vocabulary holds " + std::to_string(vocab.size()) + " phrases");

        std::vector<SparseVector> rhos;
        rhos.reserve(msgs.size());
        for (const auto& doc : docs) rhos.push_back(tfidf_vector(doc, vocab));
        dump.vocab_file = "vocab.txt";
        append_to_dump(dump, aggregate_tfidf(georef, 0, msgs, rhos, vocab.size(), cfg));
    }
    write_feature_dump(dump, features_path);

    nlohmann::json params;
    params["day"] = args.day;
    params["family"] = args.family;
    params["query"] = args.query;
    params["ngrams"] = args.ngrams_n;
    params["min_df"] = args.min_df;
    params["truncation"] = args.truncation;
    params["threads"] = args.threads;
    write_manifest(args.out_dir, "featurize",
                   {{"corpus", args.corpus_file}, {"grid", args.grid_file}},
                   outputs, params);
}

// ---------------------------------------------------------------------------
// shared loading for train / evaluate / predict
// ---------------------------------------------------------------------------

struct LoadedFeatures {
    FeatureDump dump;
    FeatureGrid grid;
    std::vector<std::string> phrases;  // names per feature dimension
};

LoadedFeatures load_features(const std::string& features_file, const Georef& g) {
    LoadedFeatures lf;
    lf.dump = load_feature_dump(features_file);
    std::uint32_t dim = 1;
    if (lf.dump.kind == FeatureKind::tfidf) {
        Vocabulary vocab = load_vocabulary(
            resolve_vocab_path(features_file, lf.dump.vocab_file));
        if (vocab.size() < lf.dump.dim)
            throw ContractError("feature dump references dimension " +
                                std::to_string(lf.dump.dim - 1) +
                                " but the vocabulary has " +
                                std::to_string(vocab.size()) + " phrases");
        dim = vocab.size();
        lf.phrases = vocab.phrases;
    } else {
        lf.phrases = {"query"};
    }
    lf.grid = grid_from_dump(lf.dump, g, dim);
    return lf;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void cmd_train(const TrainArgs& args) {
    RasterGrid raster = load_raster(args.grid_file);
    LabelGrid labels = derive_labels(raster, kFloodThreshold, kPermanentThreshold);
    LoadedFeatures lf = load_features(args.features_file, raster);

    std::vector<char> eligible(labels.labels.size(), 0);
    for (std::size_t i = 0; i < eligible.size(); ++i)
        eligible[i] = labels.labels[i] != CellLabel::excluded &&
                      !lf.grid.cells[i].empty_mass;
    std::vector<std::size_t> cells =
        balanced_sample(labels, args.train_size, derive_seed(args.seed, 0), &eligible);
    Design design = build_design(lf.grid, labels, cells);

    SagaOptions opts;
    opts.penalize_intercept = !args.no_penalize_intercept;
    CvResult cv = cross_validate_c(design, default_c_grid(design.n_rows()),
                                   args.cv_folds, derive_seed(args.seed, 1), opts);
    opts.seed = derive_seed(args.seed, 2);
    FitResult fit = fit_saga(design, cv.chosen_c, opts);

    ensure_out_dir(args.out_dir);
    const std::string model_path = args.out_dir + "/model.txt";
    write_model(fit, model_path);
    std::printf("c = %s  nonzero = %zu  epochs = %d\n", format_g9(fit.c).c_str(),
                fit.nonzero.size(), fit.epochs);

    nlohmann::json params;
    params["train_size"] = args.train_size;
    params["cv_folds"] = args.cv_folds;
    params["seed"] = args.seed;
    params["threads"] = args.threads;
    params["penalize_intercept"] = !args.no_penalize_intercept;
    write_manifest(args.out_dir, "train",
                   {{"features", args.features_file}, {"grid", args.grid_file}},
                   {{"model", model_path}}, params);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

void cmd_evaluate(const EvaluateArgs& args) {
    RasterGrid raster = load_raster(args.grid_file);
    LabelGrid labels = derive_labels(raster, kFloodThreshold, kPermanentThreshold);
    LoadedFeatures lf = load_features(args.features_file, raster);

    ExperimentConfig config;
    config.n_runs = args.runs;
    config.train_size = args.train_size;
    config.test_size = args.test_size;
    config.cv_folds = args.cv_folds;
    config.seed = args.seed;
    config.threads = args.threads;
    config.fit_options.penalize_intercept = !args.no_penalize_intercept;
    ExperimentReport report = run_experiment(config, labels, lf.grid);

    ensure_out_dir(args.out_dir);
    const std::string report_path = args.out_dir + "/report.csv";
    const std::string relevance_path = args.out_dir + "/relevance.csv";
    write_experiment_csv(report, report_path);
    write_relevance_csv(report.relevance, lf.phrases, relevance_path);
    std::printf("F1 = %s ± %s\n", format_g9(report.mean_f1).c_str(),
                format_g9(report.std_f1).c_str());

    nlohmann::json params;
    params["runs"] = args.runs;
    params["train_size"] = args.train_size;
    params["test_size"] = args.test_size;
    params["cv_folds"] = args.cv_folds;
    params["seed"] = args.seed;
    params["threads"] = args.threads;
    params["penalize_intercept"] = !args.no_penalize_intercept;
    write_manifest(args.out_dir, "evaluate",
                   {{"features", args.features_file}, {"grid", args.grid_file}},
                   {{"report", report_path}, {"relevance", relevance_path}}, params);
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

void cmd_predict(const PredictArgs& args) {
    RasterGrid raster = load_raster(args.grid_file);
    LoadedFeatures lf = load_features(args.features_file, raster);
    LoadedModel model = load_model(args.model_file);
    std::vector<double> w = model.to_weights(lf.grid.dim);

    RasterGrid prob;
    static_cast<Georef&>(prob) = static_cast<const Georef&>(raster);
    prob.values.assign(raster.size(), prob.nodata);
    for (std::size_t cell = 0; cell < lf.grid.cells.size(); ++cell) {
        const CellFeatures& f = lf.grid.cells[cell];
        if (f.empty_mass) continue;  // no kernel mass: emit NODATA
        double a = w[0];
        if (lf.grid.kind == FeatureKind::smer) {
            a += w[1] * f.smer;
        } else {
            SparseVector x = f.tfidf;
            x.normalize();  // same renormalization the training design applies
            for (std::size_t k = 0; k < x.idx.size(); ++k)
                a += w[x.idx[k] + 1] * x.val[k];
        }
        prob.values[cell] = predict_proba_margin(a);
    }

    ensure_out_dir(args.out_dir);
    const std::string out_path = args.out_dir + "/probability.asc";
    write_raster(prob, out_path);
    log::info("wrote " + out_path);

    nlohmann::json params;
    params["threads"] = args.threads;
    write_manifest(args.out_dir, "predict",
                   {{"model", args.model_file},
                    {"features", args.features_file},
                    {"grid", args.grid_file}},
                   {{"probability", out_path}}, params);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rastercast: daily flood-probability rasters from geotagged short texts"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic scenario (heights + corpus)");
    synth_cmd->add_option("--spec", synth_args.spec_file, "scenario config (key=value)")
        ->required();
    synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();

    FeaturizeArgs feat_args;
    CLI::App* feat_cmd = app.add_subcommand(
        "featurize", "aggregate a corpus into per-cell features for one day");
    feat_cmd->add_option("--corpus", feat_args.corpus_file, "JSONL message corpus")
        ->required();
    feat_cmd->add_option("--grid", feat_args.grid_file, "water-height raster (.asc)")
        ->required();
    feat_cmd->add_option("--day", feat_args.day, "day to featurize (YYYY-MM-DD)")
        ->required();
    feat_cmd->add_option("--family", feat_args.family, "feature family")
        ->required()
        ->check(CLI::IsMember({"smer", "tfidf"}));
    feat_cmd->add_option("--query", feat_args.query,
                         "comma-separated query phrases (smer only)");
    feat_cmd->add_option("--ngrams", feat_args.ngrams_n, "max n-gram order (1 or 2)")
        ->check(CLI::Range(1, 2));
    feat_cmd->add_option("--min-df", feat_args.min_df,
                         "keep phrases in more than this many messages");
    feat_cmd->add_option("--truncation", feat_args.truncation,
                         "kernel cutoff in dispersion multiples (0 = exact)");
    feat_cmd->add_option("--threads", feat_args.threads, "worker threads (0 = all)");
    feat_cmd->add_option("--out", feat_args.out_dir, "output directory")->required();

    TrainArgs train_args;
    CLI::App* train_cmd =
        app.add_subcommand("train", "fit one model on a balanced training sample");
    train_cmd->add_option("--features", train_args.features_file, "feature dump")
        ->required();
    train_cmd->add_option("--grid", train_args.grid_file, "water-height raster (.asc)")
        ->required();
    train_cmd->add_option("--train-size", train_args.train_size,
                          "balanced training sample size");
    train_cmd->add_option("--cv-folds", train_args.cv_folds, "cross-validation folds");
    train_cmd->add_option("--seed", train_args.seed, "master seed")->required();
    train_cmd->add_option("--threads", train_args.threads, "worker threads (0 = all)");
    train_cmd->add_flag("--no-penalize-intercept", train_args.no_penalize_intercept,
                        "exempt the intercept from the L1 penalty");
    train_cmd->add_option("--out", train_args.out_dir, "output directory")->required();

    EvaluateArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand(
        "evaluate", "run the multi-run balanced-sampling protocol and report F1");
    eval_cmd->add_option("--features", eval_args.features_file, "feature dump")
        ->required();
    eval_cmd->add_option("--grid", eval_args.grid_file, "water-height raster (.asc)")
        ->required();
    eval_cmd->add_option("--runs", eval_args.runs, "independent runs");
    eval_cmd->add_option("--train-size", eval_args.train_size,
                         "balanced training sample size");
    eval_cmd->add_option("--test-size", eval_args.test_size,
                         "balanced test sample size");
    eval_cmd->add_option("--cv-folds", eval_args.cv_folds, "cross-validation folds");
    eval_cmd->add_option("--seed", eval_args.seed, "master seed")->required();
    eval_cmd->add_option("--threads", eval_args.threads, "worker threads (0 = all)");
    eval_cmd->add_flag("--no-penalize-intercept", eval_args.no_penalize_intercept,
                       "exempt the intercept from the L1 penalty");
    eval_cmd->add_option("--out", eval_args.out_dir, "output directory")->required();

    PredictArgs pred_args;
    CLI::App* pred_cmd = app.add_subcommand(
        "predict", "emit a flood-probability raster from a fitted model");
    pred_cmd->add_option("--model", pred_args.model_file, "model file")->required();
    pred_cmd->add_option("--features", pred_args.features_file, "feature dump")
        ->required();
    pred_cmd->add_option("--grid", pred_args.grid_file, "water-height raster (.asc)")
        ->required();
    pred_cmd->add_option("--threads", pred_args.threads, "worker threads (0 = all)");
    pred_cmd->add_option("--out", pred_args.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) cmd_synth(synth_args);
        else if (feat_cmd->parsed()) cmd_featurize(feat_args);
        else if (train_cmd->parsed()) cmd_train(train_args);
        else if (eval_cmd->parsed()) cmd_evaluate(eval_args);
        else if (pred_cmd->parsed()) cmd_predict(pred_args);
        return 0;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "rastercast: %s\n", e.what());
        return 2;
    } catch (const rastercast::ParseError& e) {
        std::fprintf(stderr, "rastercast: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "rastercast: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rastercast: %s\n", e.what());
        return 1;
    }
}
