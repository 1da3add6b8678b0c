#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rastercast/error.hpp"
#include "rastercast/fmt.hpp"
#include "rastercast/geometry.hpp"

namespace rastercast {

// Shared georeferencing: origin is the lower-left corner of the lower-left
// cell, row 0 is the southernmost row, values are row-major.
struct Georef {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    double origin_lon = 0.0;
    double origin_lat = 0.0;
    double resolution = 1.0;

    std::size_t size() const { return n_rows * n_cols; }
    std::size_t index(std::size_t row, std::size_t col) const {
        return row * n_cols + col;
    }
    bool same_shape(const Georef& o) const {
        return n_rows == o.n_rows && n_cols == o.n_cols &&
               origin_lon == o.origin_lon && origin_lat == o.origin_lat &&
               resolution == o.resolution;
    }
};

struct RasterGrid : Georef {
    double nodata = -9999.0;
    std::vector<double> values;
};

enum class CellLabel : std::uint8_t { dry = 0, flooded = 1, excluded = 2 };

struct LabelGrid : Georef {
    std::vector<CellLabel> labels;
};

struct LabelCounts {
    std::size_t dry = 0;
    std::size_t flooded = 0;
    std::size_t excluded = 0;
};

inline GeoPoint cell_center(const Georef& g, std::size_t row, std::size_t col) {
    if (row >= g.n_rows || col >= g.n_cols) {
        throw std::out_of_range("cell (" + std::to_string(row) + ", " +
                                std::to_string(col) + ") outside grid " +
                                std::to_string(g.n_rows) + "x" +
                                std::to_string(g.n_cols));
    }
    return {g.origin_lon + (static_cast<double>(col) + 0.5) * g.resolution,
            g.origin_lat + (static_cast<double>(row) + 0.5) * g.resolution};
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

}  // namespace detail

// ASCII grid reader. Header: ncols, nrows, xllcorner, yllcorner, cellsize,
// NODATA_value (one per line, in that order), then nrows data rows of ncols
// values each. Data rows run south to north: the last row in the file is the
// northernmost, so file order matches the internal row-0-is-south layout.
inline RasterGrid load_raster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open raster file: " + path);

    RasterGrid grid;
    std::string line;
    std::size_t line_no = 0;

    auto next_tokens = [&](std::vector<std::string_view>& toks,
                           std::string& storage) -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            storage = line;
            toks = detail::split_ws(storage);
            if (!toks.empty()) return true;
        }
        return false;
    };

    auto fail = [&](const std::string& what) -> void {
        throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
    };

    static constexpr const char* keys[6] = {"ncols",     "nrows",    "xllcorner",
                                            "yllcorner", "cellsize", "NODATA_value"};
    double header_vals[6];
    std::string storage;
    std::vector<std::string_view> toks;
    for (int k = 0; k < 6; ++k) {
        if (!next_tokens(toks, storage)) fail(std::string("missing header field ") + keys[k]);
        if (toks.size() != 2 || !detail::iequals(toks[0], keys[k]))
            fail(std::string("expected header line '") + keys[k] + " <value>'");
        if (!parse_double(toks[1], header_vals[k]))
            fail(std::string("non-numeric value for ") + keys[k] + ": '" +
                 std::string(toks[1]) + "'");
    }
    double ncols_f = header_vals[0], nrows_f = header_vals[1];
    if (ncols_f < 1 || ncols_f != std::floor(ncols_f))
        throw ParseError(path + ": ncols must be a positive integer");
    if (nrows_f < 1 || nrows_f != std::floor(nrows_f))
        throw ParseError(path + ": nrows must be a positive integer");
    grid.n_cols = static_cast<std::size_t>(ncols_f);
    grid.n_rows = static_cast<std::size_t>(nrows_f);
    grid.origin_lon = header_vals[2];
    grid.origin_lat = header_vals[3];
    grid.resolution = header_vals[4];
    grid.nodata = header_vals[5];
    if (!(grid.resolution > 0)) throw ParseError(path + ": cellsize must be positive");

    grid.values.resize(grid.size());
    for (std::size_t r = 0; r < grid.n_rows; ++r) {
        if (!next_tokens(toks, storage))
            throw ParseError(path + ": unexpected end of file: expected " +
                             std::to_string(grid.n_rows) + " data rows, found " +
                             std::to_string(r));
        if (toks.size() != grid.n_cols)
            fail("expected " + std::to_string(grid.n_cols) + " values, got " +
                 std::to_string(toks.size()));
        for (std::size_t c = 0; c < grid.n_cols; ++c) {
            double v;
            if (!parse_double(toks[c], v))
                fail("non-numeric value '" + std::string(toks[c]) + "'");
            grid.values[grid.index(r, c)] = v;
        }
    }
    if (next_tokens(toks, storage)) fail("trailing data after last raster row");
    return grid;
}

inline void write_raster(const RasterGrid& grid, const std::string& path) {
    if (grid.values.size() != grid.size())
        throw ContractError("raster value count does not match dimensions");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open raster file for writing: " + path);
    out << "ncols " << grid.n_cols << "\n";
    out << "nrows " << grid.n_rows << "\n";
    out << "xllcorner " << format_exact(grid.origin_lon) << "\n";
    out << "yllcorner " << format_exact(grid.origin_lat) << "\n";
    out << "cellsize " << format_exact(grid.resolution) << "\n";
    out << "NODATA_value " << format_exact(grid.nodata) << "\n";
    std::string row;
    for (std::size_t r = 0; r < grid.n_rows; ++r) {
        row.clear();
        for (std::size_t c = 0; c < grid.n_cols; ++c) {
            if (c) row += ' ';
            row += format_exact(grid.values[grid.index(r, c)]);
        }
        row += '\n';
        out << row;
    }
    out.flush();
    if (!out) throw IoError("failed writing raster file: " + path);
}

// Height → label. Exclusion absorbs the permanent-water sentinel: any
// h >= permanent_threshold is excluded, as are nodata and non-finite cells.
// "Flooded" requires strictly more water than flood_threshold.
inline LabelGrid derive_labels(const RasterGrid& heights, double flood_threshold,
                               double permanent_threshold) {
    if (!(flood_threshold >= 0) || !(flood_threshold < permanent_threshold))
        throw ContractError("thresholds must satisfy 0 <= flood < permanent");
    LabelGrid out;
    static_cast<Georef&>(out) = heights;
    out.labels.resize(heights.size());
    for (std::size_t i = 0; i < heights.values.size(); ++i) {
        double h = heights.values[i];
        CellLabel lab;
        if (h == heights.nodata || !std::isfinite(h) || h >= permanent_threshold)
            lab = CellLabel::excluded;
        else if (h > flood_threshold)
            lab = CellLabel::flooded;
        else
            lab = CellLabel::dry;
        out.labels[i] = lab;
    }
    return out;
}

inline LabelCounts count_labels(const LabelGrid& grid) {
    LabelCounts c;
    for (CellLabel l : grid.labels) {
        switch (l) {
            case CellLabel::dry: ++c.dry; break;
            case CellLabel::flooded: ++c.flooded; break;
            case CellLabel::excluded: ++c.excluded; break;
        }
    }
    return c;
}

}  // namespace rastercast
