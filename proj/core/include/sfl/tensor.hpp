#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfl {

/// Dense row-major tensor of 64-bit floats.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (element_count(shape) != data.size())
            throw std::invalid_argument("Tensor: shape/data size mismatch");
    }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = element_count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    std::size_t size() const { return data.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 3-d access (batch, channel, position)
    double& at3(std::size_t b, std::size_t c, std::size_t t) {
        return data[(b * shape[1] + c) * shape[2] + t];
    }
    double at3(std::size_t b, std::size_t c, std::size_t t) const {
        return data[(b * shape[1] + c) * shape[2] + t];
    }
    // 2-d access (batch, feature)
    double& at2(std::size_t b, std::size_t f) { return data[b * shape[1] + f]; }
    double at2(std::size_t b, std::size_t f) const { return data[b * shape[1] + f]; }

    bool operator==(const Tensor& o) const = default;
};

inline std::string shape_string(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

}  // namespace sfl
