#pragma once

#include "qig/common.hpp"

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace qig::ad {

/// Dense real tensor, 64-bit throughout. Complex quantities (statevector
/// amplitudes) never enter the tape directly; they cross into tensors at the
/// |amplitude|^2 probability boundary.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        QIG_CHECK(static_cast<std::int64_t>(data.size()) == numel_of(shape),
                  "tensor data length ", data.size(), " does not match shape product ",
                  numel_of(shape));
    }

    static std::int64_t numel_of(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) {
            QIG_CHECK(d >= 0, "negative dimension ", d);
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) {
        const auto n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    }

    static Tensor full(std::vector<int> s, double v) {
        const auto n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v));
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    static Tensor vector(std::vector<double> d) {
        const int n = static_cast<int>(d.size());
        return Tensor({n}, std::move(d));
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    bool is_scalar() const { return data.size() == 1; }
    double scalar_value() const {
        QIG_CHECK(is_scalar(), "expected scalar, got ", data.size(), " elements");
        return data[0];
    }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void accumulate(const Tensor& other) {
        QIG_CHECK(data.size() == other.data.size(), "accumulate size mismatch ",
                  data.size(), " vs ", other.data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] += other.data[i];
        }
    }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) {
            out += ",";
        }
    }
    return out + "]";
}

} // namespace qig::ad
