#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fenet/common.hpp"

namespace fenet {

// Dense double tensor, shape (batch n, channels c, length len), row-major.
// A plain matrix is represented with n = 1; a flat feature block as len = 1.
struct Tensor {
    std::size_t n = 0, c = 0, len = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::size_t n_, std::size_t c_, std::size_t len_, double fill = 0.0)
        : n(n_), c(c_), len(len_), v(n_ * c_ * len_, fill) {}

    std::size_t size() const { return v.size(); }

    double& at(std::size_t b, std::size_t ch, std::size_t i) { return v[(b * c + ch) * len + i]; }
    double at(std::size_t b, std::size_t ch, std::size_t i) const { return v[(b * c + ch) * len + i]; }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && len == o.len; }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(len) + ")";
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.n, t.c, t.len); }

    bool finite() const { return all_finite(v); }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.same_shape(b), ErrorKind::invalid_input,
            std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace fenet
