// Dense row-major tensor, templated on scalar so the whole network stack
// can run in f32 (training default) or f64 (gradient checks).
#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "uasim/common.hpp"

namespace uasim::nn {

template <class S>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> shp, S fill = S(0))
        : shape(std::move(shp)),
          data(std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<>()), fill) {}

    static Tensor zeros(std::vector<size_t> shp) { return Tensor(std::move(shp), S(0)); }

    static Tensor from_vector(std::vector<size_t> shp, const std::vector<double>& v) {
        Tensor t(std::move(shp));
        require(t.data.size() == v.size(), "Tensor::from_vector: size mismatch");
        for (size_t i = 0; i < v.size(); ++i) t.data[i] = static_cast<S>(v[i]);
        return t;
    }

    size_t size() const { return data.size(); }
    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    S& operator()(size_t r, size_t c) { return data[r * cols() + c]; }
    const S& operator()(size_t r, size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::vector<double> to_vector() const {
        std::vector<double> v(data.size());
        for (size_t i = 0; i < data.size(); ++i) v[i] = static_cast<double>(data[i]);
        return v;
    }
};

}  // namespace uasim::nn
