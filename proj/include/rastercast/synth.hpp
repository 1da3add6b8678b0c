#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "rastercast/error.hpp"
#include "rastercast/fmt.hpp"
#include "rastercast/raster.hpp"
#include "rastercast/rng.hpp"
#include "rastercast/time.hpp"

namespace rastercast {

// ---------------------------------------------------------------------------
// Scenario specification (flat key=value config)
// ---------------------------------------------------------------------------

struct ScenarioSpec {
    std::size_t n_rows = 100;
    std::size_t n_cols = 100;
    double origin_lon = -95.8;
    double origin_lat = 29.2;
    double resolution = 0.01;
    double flood_fraction = 0.2;
    std::size_t n_messages = 5000;
    double signal_strength = 0.6;    // p_s: flooded-cell messages emit signal
    std::size_t signal_vocab = 20;   // distinct signal tokens
    std::size_t noise_vocab = 480;   // distinct noise tokens
    double dispersion_min = 2e-3;    // log-uniform bbox half-extent range (deg)
    double dispersion_max = 5e-2;
    double point_share = 0.1;        // fraction geotagged as exact points
    int n_days = 1;
    std::string start_date = "2017-08-15";
    std::uint64_t seed = 0;
};

inline void validate_spec(const ScenarioSpec& spec) {
    if (spec.n_rows == 0 || spec.n_cols == 0)
        throw ContractError("grid must have at least one cell");
    if (spec.resolution <= 0.0) throw ContractError("resolution must be positive");
    if (!(spec.flood_fraction > 0.0 && spec.flood_fraction < 1.0))
        throw ContractError("flood fraction must lie strictly between 0 and 1");
    if (!(spec.signal_strength >= 0.0 && spec.signal_strength <= 1.0))
        throw ContractError("signal strength must lie in [0, 1]");
    if (spec.dispersion_min <= 0.0 || spec.dispersion_max < spec.dispersion_min)
        throw ContractError("dispersion range must satisfy 0 < min <= max");
    if (!(spec.point_share >= 0.0 && spec.point_share <= 1.0))
        throw ContractError("point share must lie in [0, 1]");
    if (spec.n_days < 1) throw ContractError("need at least one day");
    CivilDate d;
    if (!try_parse_date(spec.start_date, d))
        throw ContractError("start_date must be YYYY-MM-DD");
    const auto size = spec.n_rows * spec.n_cols;
    const auto k = static_cast<std::size_t>(
        std::llround(spec.flood_fraction * static_cast<double>(size)));
    if (k == 0 || k >= size)
        throw ContractError("infeasible flood fraction " +
                            format_g9(spec.flood_fraction) + " on a " +
                            std::to_string(spec.n_rows) + "x" +
                            std::to_string(spec.n_cols) + " grid");
}

// `key=value` lines; '#' starts a comment; blank lines ignored; unknown keys
// rejected. Missing keys keep their defaults.
inline ScenarioSpec parse_scenario_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario config: " + path);
    ScenarioSpec spec;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fail = [&](const std::string& msg) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
        };
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        std::string body = line.substr(a, b - a + 1);
        std::size_t eq = body.find('=');
        if (eq == std::string::npos) fail("expected key=value");
        auto trim = [](std::string s) {
            std::size_t x = s.find_first_not_of(" \t");
            std::size_t y = s.find_last_not_of(" \t");
            return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
        };
        std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty()) fail("expected key=value");

        auto num = [&](double& target) {
            if (!parse_double(value, target)) fail("bad number for '" + key + "': " + value);
        };
        auto count = [&](auto& target) {
            long long v = 0;
            if (!parse_long(value, v) || v < 0)
                fail("bad count for '" + key + "': " + value);
            target = static_cast<std::remove_reference_t<decltype(target)>>(v);
        };
        if (key == "rows") count(spec.n_rows);
        else if (key == "cols") count(spec.n_cols);
        else if (key == "origin_lon") num(spec.origin_lon);
        else if (key == "origin_lat") num(spec.origin_lat);
        else if (key == "resolution") num(spec.resolution);
        else if (key == "flood_fraction") num(spec.flood_fraction);
        else if (key == "messages") count(spec.n_messages);
        else if (key == "signal_strength") num(spec.signal_strength);
        else if (key == "signal_vocab") count(spec.signal_vocab);
        else if (key == "noise_vocab") count(spec.noise_vocab);
        else if (key == "dispersion_min") num(spec.dispersion_min);
        else if (key == "dispersion_max") num(spec.dispersion_max);
        else if (key == "point_share") num(spec.point_share);
        else if (key == "days") count(spec.n_days);
        else if (key == "start_date") spec.start_date = value;
        else if (key == "seed") count(spec.seed);
        else fail("unknown key '" + key + "'");
    }
    validate_spec(spec);
    return spec;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace synth_detail {

// Tokens are built from a vowel-free alphabet, so they pass the text pipeline
// untouched: no stopword, stemmer, or emoticon rule can fire on them.
inline constexpr char kAlphabet[] = "bcdfghjklmnpqrtvwxz";  // 19 consonants
inline constexpr std::size_t kAlphabetSize = 19;

inline std::vector<std::string> make_vocab(const std::string& prefix,
                                           std::size_t count, int letters) {
    std::size_t capacity = 1;
    for (int i = 0; i < letters; ++i) capacity *= kAlphabetSize;
    if (count > capacity)
        throw ContractError("vocabulary of " + std::to_string(count) +
                            " exceeds the " + std::to_string(capacity) +
                            " distinct " + std::to_string(letters) +
                            "-letter codes");
    std::vector<std::string> words;
    words.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string w = prefix;
        std::size_t v = i;
        std::string tail(static_cast<std::size_t>(letters), kAlphabet[0]);
        for (int p = letters - 1; p >= 0; --p) {
            tail[static_cast<std::size_t>(p)] = kAlphabet[v % kAlphabetSize];
            v /= kAlphabetSize;
        }
        words.push_back(w + tail);
    }
    return words;
}

// Smooth random field in [0, 1]: one uniform value per coarse lattice node,
// bilinearly interpolated with a smoothstep easing — value noise, so nearby
// cells get similar values and thresholding yields contiguous blobs.
inline std::vector<double> value_noise(std::size_t n_rows, std::size_t n_cols,
                                       Rng& rng) {
    const std::size_t spacing =
        std::max<std::size_t>(3, std::min(n_rows, n_cols) / 6);
    const std::size_t lr = n_rows / spacing + 2;
    const std::size_t lc = n_cols / spacing + 2;
    std::vector<double> lattice(lr * lc);
    for (double& v : lattice) v = rng.unit();

    auto ease = [](double t) { return t * t * (3.0 - 2.0 * t); };
    std::vector<double> field(n_rows * n_cols);
    for (std::size_t r = 0; r < n_rows; ++r) {
        double fr = static_cast<double>(r) / static_cast<double>(spacing);
        std::size_t r0 = static_cast<std::size_t>(fr);
        double tr = ease(fr - static_cast<double>(r0));
        for (std::size_t c = 0; c < n_cols; ++c) {
            double fc = static_cast<double>(c) / static_cast<double>(spacing);
            std::size_t c0 = static_cast<std::size_t>(fc);
            double tc = ease(fc - static_cast<double>(c0));
            double v00 = lattice[r0 * lc + c0];
            double v01 = lattice[r0 * lc + c0 + 1];
            double v10 = lattice[(r0 + 1) * lc + c0];
            double v11 = lattice[(r0 + 1) * lc + c0 + 1];
            double top = v00 + (v01 - v00) * tc;
            double bot = v10 + (v11 - v10) * tc;
            field[r * n_cols + c] = top + (bot - top) * tr;
        }
    }
    return field;
}

inline std::string timestamp_string(const CivilDate& start, int day_offset,
                                    long seconds_of_day) {
    std::int64_t days = detail::days_from_civil(start.year, start.month, start.day) +
                        day_offset;
    int y, m, d;
    detail::civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02ld:%02ld:%02ldZ", y, m, d,
                  seconds_of_day / 3600, (seconds_of_day / 60) % 60,
                  seconds_of_day % 60);
    return buf;
}

}  // namespace synth_detail

// Label thresholds the generator calibrates against (see raster module).
inline constexpr double kSynthFloodThreshold = 0.2;
inline constexpr double kSynthPermanentThreshold = 10.0;

struct GeneratedScenario {
    RasterGrid heights;
    std::string corpus_jsonl;  // full file contents, one JSON object per line
    std::vector<std::string> signal_vocab;
    std::vector<std::string> noise_vocab;
};

// Deterministic scenario build. The height field is rank-thresholded value
// noise: the top flood_fraction share of cells receives heights in
// (kSynthFloodThreshold, kSynthPermanentThreshold), the rest stays at or
// below the flood threshold, so label derivation reproduces the requested
// fraction exactly. Messages are placed uniformly; a message whose spatial
// index lands in a flooded cell draws signal vocabulary with probability
// signal_strength, a dry-cell message with signal_strength/10.
inline GeneratedScenario generate(const ScenarioSpec& spec) {
    validate_spec(spec);
    GeneratedScenario out;
    out.signal_vocab = synth_detail::make_vocab("sig", spec.signal_vocab, 2);
    out.noise_vocab = synth_detail::make_vocab("wrd", spec.noise_vocab, 3);

    // --- height raster ---
    Rng field_rng(derive_seed(spec.seed, 0));
    const std::size_t size = spec.n_rows * spec.n_cols;
    std::vector<double> field =
        synth_detail::value_noise(spec.n_rows, spec.n_cols, field_rng);

    std::vector<std::uint32_t> order(size);
    for (std::size_t i = 0; i < size; ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (field[a] != field[b]) return field[a] > field[b];
        return a < b;
    });
    const std::size_t k = static_cast<std::size_t>(
        std::llround(spec.flood_fraction * static_cast<double>(size)));

    RasterGrid& heights = out.heights;
    heights.n_rows = spec.n_rows;
    heights.n_cols = spec.n_cols;
    heights.origin_lon = spec.origin_lon;
    heights.origin_lat = spec.origin_lat;
    heights.resolution = spec.resolution;
    heights.values.assign(size, 0.0);
    std::vector<char> flooded(size, 0);
    for (std::size_t r = 0; r < k; ++r) {
        // deepest water where the field peaks; all strictly inside the band
        double t = k > 1 ? static_cast<double>(k - 1 - r) / static_cast<double>(k - 1)
                         : 0.5;
        heights.values[order[r]] = 0.3 + 4.5 * t;
        flooded[order[r]] = 1;
    }
    const std::size_t m = size - k;
    for (std::size_t r = k; r < size; ++r) {
        double t = m > 1 ? static_cast<double>(size - 1 - r) / static_cast<double>(m - 1)
                         : 0.5;
        heights.values[order[r]] = 0.19 * t;  // stays at or below the threshold
    }

    // --- corpus ---
    CivilDate start;
    try_parse_date(spec.start_date, start);
    const double lon_extent = static_cast<double>(spec.n_cols) * spec.resolution;
    const double lat_extent = static_cast<double>(spec.n_rows) * spec.resolution;
    const double log_min = std::log(spec.dispersion_min);
    const double log_span = std::log(spec.dispersion_max) - log_min;

    Rng rng(derive_seed(spec.seed, 1));
    std::string corpus;
    for (std::size_t i = 0; i < spec.n_messages; ++i) {
        bool is_point = rng.unit() < spec.point_share;
        double lon = spec.origin_lon + rng.unit() * lon_extent;
        double lat = spec.origin_lat + rng.unit() * lat_extent;
        nlohmann::json j;
        if (is_point) {
            j["point"] = {lon, lat};
        } else {
            double hw = std::exp(log_min + rng.unit() * log_span);
            double hh = std::exp(log_min + rng.unit() * log_span);
            j["bbox"] = {lon - hw, lat - hh, lon + hw, lat + hh};
        }
        int day = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_days)));
        long seconds = static_cast<long>(rng.below(86400));
        j["created_at"] = synth_detail::timestamp_string(start, day, seconds);

        std::size_t row = std::min(
            spec.n_rows - 1, static_cast<std::size_t>(std::max(
                                 0.0, (lat - spec.origin_lat) / spec.resolution)));
        std::size_t col = std::min(
            spec.n_cols - 1, static_cast<std::size_t>(std::max(
                                 0.0, (lon - spec.origin_lon) / spec.resolution)));
        bool in_flood = flooded[row * spec.n_cols + col] != 0;
        double p_signal = in_flood ? spec.signal_strength : spec.signal_strength / 10.0;
        bool emit_signal = rng.unit() < p_signal;

        std::vector<std::string> tokens;
        if (emit_signal) {
            std::size_t n_sig = 2 + rng.below(3);
            for (std::size_t t = 0; t < n_sig; ++t)
                if (!out.signal_vocab.empty())
                    tokens.push_back(out.signal_vocab[rng.below(out.signal_vocab.size())]);
            std::size_t n_noise = 1 + rng.below(2);
            for (std::size_t t = 0; t < n_noise; ++t)
                if (!out.noise_vocab.empty())
                    tokens.push_back(out.noise_vocab[rng.below(out.noise_vocab.size())]);
        } else {
            std::size_t n_noise = 3 + rng.below(4);
            for (std::size_t t = 0; t < n_noise; ++t)
                if (!out.noise_vocab.empty())
                    tokens.push_back(out.noise_vocab[rng.below(out.noise_vocab.size())]);
        }
        std::string text;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            if (t) text += ' ';
            text += tokens[t];
        }

        char idbuf[24];
        std::snprintf(idbuf, sizeof(idbuf), "m%06zu", i);
        j["id"] = idbuf;
        j["text"] = text;
        corpus += j.dump();
        corpus += '\n';
    }
    out.corpus_jsonl = std::move(corpus);
    return out;
}

inline void write_scenario(const GeneratedScenario& scenario,
                           const std::string& raster_path,
                           const std::string& corpus_path) {
    write_raster(scenario.heights, raster_path);
    std::ofstream out(corpus_path, std::ios::binary);
    if (!out) throw IoError("cannot open corpus file for writing: " + corpus_path);
    out << scenario.corpus_jsonl;
    out.flush();
    if (!out) throw IoError("failed writing corpus file: " + corpus_path);
}

}  // namespace rastercast
