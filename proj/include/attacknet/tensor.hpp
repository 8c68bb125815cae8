#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "attacknet/errors.hpp"

namespace attacknet {

/// Dense N-dimensional row-major tensor. Element type is float for the
/// engine; double instantiations are used by the gradient-check tests.
template <typename T = float>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> shape, T fill = T{})
        : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

    TensorT(std::vector<std::size_t> shape, std::vector<T> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != checked_size(shape_)) {
            std::ostringstream os;
            os << "tensor_create: value count " << data_.size()
               << " does not match shape product " << checked_size(shape_);
            throw ShapeError(os.str());
        }
    }

    static TensorT zeros_like(const TensorT& other) { return TensorT(other.shape_); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // Row-major indexing: (i,j) in shape [A,B] is data[i*B + j].
    T& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    const T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    TensorT reshaped(std::vector<std::size_t> new_shape) const {
        std::size_t n = checked_size(new_shape);
        if (n != data_.size()) {
            throw ShapeError("reshape: element count mismatch");
        }
        TensorT out;
        out.shape_ = std::move(new_shape);
        out.data_ = data_;
        return out;
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeError("tensor shape extents must be >= 1");
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;

template <typename T>
std::string shape_str(const TensorT<T>& t) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < t.shape().size(); ++i) {
        if (i) os << ",";
        os << t.shape()[i];
    }
    os << "]";
    return os.str();
}

enum class EwKind { Add, Sub, Mul };

template <typename T>
TensorT<T> elementwise(const TensorT<T>& a, const TensorT<T>& b, EwKind kind) {
    if (!a.same_shape(b)) {
        throw ShapeError("elementwise: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    TensorT<T> out(a.shape());
    const std::size_t n = a.size();
    switch (kind) {
        case EwKind::Add:
            for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
            break;
        case EwKind::Sub:
            for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
            break;
        case EwKind::Mul:
            for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
            break;
    }
    return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, EwKind::Add); }
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, EwKind::Sub); }
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, EwKind::Mul); }

/// C[M,N] = A[M,K] * B[K,N]. Plain i-k-j loop; row-major friendly and
/// vectorizes well enough for a model this small.
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: operands must be rank 2");
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner extents differ, " + shape_str(a) + " vs " + shape_str(b));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<T> c({m, n}, T{});
    const T* pa = a.data();
    const T* pb = b.data();
    T* pc = c.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const T av = pa[i * k + p];
            const T* brow = pb + p * n;
            T* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

enum class ReduceKind { Sum, Mean, Max };

/// Reduce over the given axes; reduced axes are removed from the shape.
/// A full reduction yields a rank-0-like scalar tensor of shape [1].
template <typename T>
TensorT<T> reduce(const TensorT<T>& a, std::vector<std::size_t> axes, ReduceKind kind) {
    std::sort(axes.begin(), axes.end());
    if (std::adjacent_find(axes.begin(), axes.end()) != axes.end()) {
        throw ShapeError("reduce: duplicate axis");
    }
    for (std::size_t ax : axes) {
        if (ax >= a.rank()) throw ShapeError("reduce: axis out of range");
    }

    std::vector<bool> reduced(a.rank(), false);
    for (std::size_t ax : axes) reduced[ax] = true;

    std::vector<std::size_t> out_shape;
    std::size_t reduce_count = 1;
    for (std::size_t d = 0; d < a.rank(); ++d) {
        if (reduced[d]) reduce_count *= a.dim(d);
        else out_shape.push_back(a.dim(d));
    }
    if (out_shape.empty()) out_shape.push_back(1);

    const T init = (kind == ReduceKind::Max) ? std::numeric_limits<T>::lowest() : T{};
    TensorT<T> out(out_shape, init);

    // Map each input element to its output slot by dropping reduced axes.
    std::vector<std::size_t> idx(a.rank(), 0);
    std::vector<std::size_t> out_strides;
    {
        std::vector<std::size_t> kept;
        for (std::size_t d = 0; d < a.rank(); ++d)
            if (!reduced[d]) kept.push_back(a.dim(d));
        out_strides.assign(kept.size(), 1);
        for (std::size_t d = kept.size(); d-- > 1;)
            out_strides[d - 1] = out_strides[d] * kept[d];
    }

    for (std::size_t flat = 0; flat < a.size(); ++flat) {
        std::size_t out_flat = 0, kept_d = 0;
        for (std::size_t d = 0; d < a.rank(); ++d) {
            if (!reduced[d]) {
                out_flat += idx[d] * out_strides[kept_d];
                ++kept_d;
            }
        }
        if (kind == ReduceKind::Max) out[out_flat] = std::max(out[out_flat], a[flat]);
        else out[out_flat] += a[flat];

        for (std::size_t d = a.rank(); d-- > 0;) {
            if (++idx[d] < a.dim(d)) break;
            idx[d] = 0;
        }
    }

    if (kind == ReduceKind::Mean) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] /= static_cast<T>(reduce_count);
    }
    return out;
}

}  // namespace attacknet
