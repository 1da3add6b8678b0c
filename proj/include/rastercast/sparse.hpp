#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace rastercast {

// Sparse vector over a fixed-dimension space: parallel arrays of strictly
// increasing indices and their (nonzero) values.
struct SparseVector {
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    std::uint32_t dim = 0;

    std::size_t nnz() const { return idx.size(); }

    void push(std::uint32_t i, double v) {
        idx.push_back(i);
        val.push_back(v);
    }

    double norm2() const {
        double s = 0.0;
        for (double v : val) s += v * v;
        return std::sqrt(s);
    }

    // Scale to unit L2 norm; zero vectors stay zero.
    void normalize() {
        double n = norm2();
        if (n > 0.0) {
            for (double& v : val) v /= n;
        }
    }
};

inline double dot(const SparseVector& a, const std::vector<double>& dense) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.idx.size(); ++k) s += a.val[k] * dense[a.idx[k]];
    return s;
}

}  // namespace rastercast
