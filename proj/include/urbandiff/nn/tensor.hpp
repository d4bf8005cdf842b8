#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "urbandiff/errors.hpp"

namespace urbandiff::nn {

// Dense row-major tensor, templated on scalar so the whole network can be
// instantiated in double for finite-difference verification while production
// paths run in float.
template <typename S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_in) : shape(std::move(shape_in)) {
        data.assign(count(shape), S(0));
    }

    static std::int64_t count(const std::vector<int>& dims) {
        std::int64_t n = 1;
        for (int d : dims) {
            if (d <= 0) throw ParameterError("tensor dims must be positive");
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(std::size_t i) const { return shape[i]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    void zero() { std::fill(data.begin(), data.end(), S(0)); }

    S& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    S operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
};

template <typename S>
std::string shape_string(const Tensor<S>& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(t.shape[i]);
    }
    return s + "]";
}

// Named handle on a parameter and its gradient accumulator.
template <typename S>
struct ParamRef {
    std::string name;
    Tensor<S>* value = nullptr;
    Tensor<S>* grad = nullptr;
};

}  // namespace urbandiff::nn
