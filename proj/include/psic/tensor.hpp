// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major double tensor. Rank 1 or 2; all shape alignment in the
// graph is explicit (repeat/reshape), there is no broadcasting.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "psic/rng.hpp"

namespace psic::ad {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

struct Tensor {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;

    Tensor() = default;

    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)) {
        for (int e : shape)
            if (e <= 0) throw std::invalid_argument("tensor: non-positive extent " + shape_str(shape));
        data.assign(static_cast<std::size_t>(numel(shape)), fill);
    }

    static Tensor zeros(int r, int c) { return Tensor({r, c}); }

    static Tensor scalar(double v) {
        Tensor t({1, 1});
        t.data[0] = v;
        return t;
    }

    static Tensor row(std::vector<double> v) {
        Tensor t;
        t.shape = {1, static_cast<int>(v.size())};
        t.data = std::move(v);
        return t;
    }

    static Tensor full(Shape s, double v) { return Tensor(std::move(s), v); }

    static Tensor randn(Shape s, Rng& rng, double sigma = 1.0) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = sigma * rng.gaussian();
        return t;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

    int rank() const { return static_cast<int>(shape.size()); }

    int rows() const { return rank() == 2 ? shape[0] : 1; }

    int cols() const { return rank() == 2 ? shape[1] : shape[0]; }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }

    const double& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double item() const {
        if (size() != 1) throw std::invalid_argument("item: tensor has " + std::to_string(size()) + " elements");
        return data[0];
    }
};

inline double squared_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return s;
}

inline double squared_distance(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s;
}

}  // namespace psic::ad
