#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coastcast/errors.hpp"

namespace coastcast {

using Shape = std::vector<std::size_t>;
using AxisRange = std::pair<std::size_t, std::size_t>;  // half-open [begin, end)

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor. Values are plain data; all gradient machinery
// lives in Tape. Instantiated for float (training) and double (oracles).
template <typename S>
struct Tensor {
    Shape shape;
    std::vector<S> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<S> d);

    static Tensor zeros(Shape s);
    static Tensor full(Shape s, S value);
    static Tensor from_data(Shape s, std::vector<S> d) { return Tensor(std::move(s), std::move(d)); }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }
    S& operator[](std::size_t i) { return data[i]; }
    const S& operator[](std::size_t i) const { return data[i]; }

    // New descriptor over the same values; element count must not change.
    Tensor reshaped(Shape s) const;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename S>
Tensor<S> tensor_concat_views(const std::vector<const Tensor<S>*>& inputs, std::size_t axis);

template <typename S>
Tensor<S> tensor_concat(const std::vector<Tensor<S>>& inputs, std::size_t axis);

template <typename S>
Tensor<S> tensor_crop(const Tensor<S>& input, const std::vector<AxisRange>& ranges);

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
    Tensor<To> out;
    out.shape = t.shape;
    out.data.assign(t.data.begin(), t.data.end());
    return out;
}

}  // namespace coastcast
