#include "coastcast/tensor.hpp"

#include <cstring>
#include <sstream>

namespace coastcast {

std::size_t shape_numel(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw ShapeError("tensor extents must be positive, got shape " + shape_str(shape));
        if (n > SIZE_MAX / e) throw ShapeError("tensor shape overflows size_t: " + shape_str(shape));
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

template <typename S>
Tensor<S>::Tensor(Shape s, std::vector<S> d) : shape(std::move(s)), data(std::move(d)) {
    const std::size_t n = shape_numel(shape);
    if (n != data.size()) {
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_str(shape) + " (" + std::to_string(n) + " elements)");
    }
}

template <typename S>
Tensor<S> Tensor<S>::zeros(Shape s) {
    const std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<S>(n, S(0)));
}

template <typename S>
Tensor<S> Tensor<S>::full(Shape s, S value) {
    const std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<S>(n, value));
}

template <typename S>
Tensor<S> Tensor<S>::reshaped(Shape s) const {
    const std::size_t n = shape_numel(s);
    if (n != numel()) {
        throw ShapeError("reshape " + shape_str(shape) + " -> " + shape_str(s) + " changes element count");
    }
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
}

template <typename S>
Tensor<S> tensor_concat_views(const std::vector<const Tensor<S>*>& inputs, std::size_t axis) {
    if (inputs.empty()) throw ValueError("concat requires at least one input");
    const Shape& ref = inputs[0]->shape;
    if (axis >= ref.size()) throw ShapeError("concat axis " + std::to_string(axis) + " out of rank " + std::to_string(ref.size()));
    std::size_t axis_total = 0;
    for (const Tensor<S>* t : inputs) {
        if (t->rank() != ref.size()) throw ShapeError("concat rank mismatch: " + shape_str(t->shape) + " vs " + shape_str(ref));
        for (std::size_t a = 0; a < ref.size(); ++a) {
            if (a != axis && t->shape[a] != ref[a]) {
                throw ShapeError("concat extent mismatch off axis " + std::to_string(axis) + ": " +
                                 shape_str(t->shape) + " vs " + shape_str(ref));
            }
        }
        axis_total += t->shape[axis];
    }
    Shape out_shape = ref;
    out_shape[axis] = axis_total;
    Tensor<S> out = Tensor<S>::zeros(out_shape);

    std::size_t outer = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= ref[a];
    std::size_t inner = 1;
    for (std::size_t a = axis + 1; a < ref.size(); ++a) inner *= ref[a];

    const std::size_t out_row = axis_total * inner;
    std::size_t dst_off = 0;
    for (const Tensor<S>* t : inputs) {
        const std::size_t block = t->shape[axis] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            std::memcpy(out.ptr() + o * out_row + dst_off, t->ptr() + o * block, block * sizeof(S));
        }
        dst_off += block;
    }
    return out;
}

template <typename S>
Tensor<S> tensor_concat(const std::vector<Tensor<S>>& inputs, std::size_t axis) {
    std::vector<const Tensor<S>*> ptrs;
    ptrs.reserve(inputs.size());
    for (const Tensor<S>& t : inputs) ptrs.push_back(&t);
    return tensor_concat_views(ptrs, axis);
}

template <typename S>
Tensor<S> tensor_crop(const Tensor<S>& input, const std::vector<AxisRange>& ranges) {
    if (ranges.size() != input.rank()) {
        throw ShapeError("crop needs one range per axis: got " + std::to_string(ranges.size()) +
                         " for rank " + std::to_string(input.rank()));
    }
    Shape out_shape(input.rank());
    for (std::size_t a = 0; a < input.rank(); ++a) {
        const auto [b, e] = ranges[a];
        if (b >= e || e > input.shape[a]) {
            throw ShapeError("crop range [" + std::to_string(b) + "," + std::to_string(e) +
                             ") out of bounds on axis " + std::to_string(a) + " with extent " +
                             std::to_string(input.shape[a]));
        }
        out_shape[a] = e - b;
    }
    Tensor<S> out = Tensor<S>::zeros(out_shape);

    // Walk all output coordinates except the last axis; the last axis is a
    // contiguous run in both tensors.
    const std::size_t rank = input.rank();
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t a = rank - 1; a-- > 0;) in_strides[a] = in_strides[a + 1] * input.shape[a + 1];

    const std::size_t run = out_shape[rank - 1];
    std::size_t rows = out.numel() / run;
    std::vector<std::size_t> coord(rank, 0);
    S* dst = out.ptr();
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t src_off = ranges[rank - 1].first;
        for (std::size_t a = 0; a < rank - 1; ++a) src_off += (coord[a] + ranges[a].first) * in_strides[a];
        std::memcpy(dst, input.ptr() + src_off, run * sizeof(S));
        dst += run;
        for (std::size_t a = rank - 1; a-- > 0;) {
            if (++coord[a] < out_shape[a]) break;
            coord[a] = 0;
        }
    }
    return out;
}

template struct Tensor<float>;
template struct Tensor<double>;
template Tensor<float> tensor_concat_views(const std::vector<const Tensor<float>*>&, std::size_t);
template Tensor<double> tensor_concat_views(const std::vector<const Tensor<double>*>&, std::size_t);
template Tensor<float> tensor_concat(const std::vector<Tensor<float>>&, std::size_t);
template Tensor<double> tensor_concat(const std::vector<Tensor<double>>&, std::size_t);
template Tensor<float> tensor_crop(const Tensor<float>&, const std::vector<AxisRange>&);
template Tensor<double> tensor_crop(const Tensor<double>&, const std::vector<AxisRange>&);

}  // namespace coastcast
