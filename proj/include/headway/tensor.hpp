#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "headway/common.hpp"

namespace headway {

/// Dense row-major array with an explicit shape.
template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, T fill = T{})
        : shape(std::move(s)), data(element_count(shape), fill)
    {
    }

    static std::size_t element_count(const std::vector<std::size_t>& s)
    {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }
    std::size_t size() const { return data.size(); }
    std::span<T> span() { return data; }
    std::span<const T> span() const { return data; }

    void check(const std::vector<std::size_t>& expected, std::string_view what) const
    {
        if (shape != expected || data.size() != element_count(shape))
            throw ShapeError(fmt::format("{}: shape [{}] does not match expected [{}]", what,
                                         fmt::join(shape, ", "), fmt::join(expected, ", ")));
    }

    template <class U>
    Tensor<U> cast() const
    {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    bool operator==(const Tensor&) const = default;
};

}  // namespace headway
