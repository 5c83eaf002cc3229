// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace reganie {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

struct TensorError : std::runtime_error {
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense contiguous row-major tensor. Copies are shallow; use clone() for a
// deep copy. Scalar type is a template parameter: float for training speed,
// double for the numerical test suites.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<T>>(shape_numel(shape_), T(0))) {}

    Tensor(Shape shape, std::shared_ptr<std::vector<T>> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if ((int64_t)data_->size() != shape_numel(shape_))
            throw TensorError("tensor data size does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(const Shape& s) { return Tensor(s); }

    static Tensor full(const Shape& s, T v) {
        Tensor t(s);
        std::fill(t.data_->begin(), t.data_->end(), v);
        return t;
    }

    static Tensor scalar(T v) { return full({1}, v); }

    static Tensor from(const Shape& s, std::vector<T> values) {
        if ((int64_t)values.size() != shape_numel(s))
            throw TensorError("tensor literal size does not match shape " + shape_str(s));
        return Tensor(s, std::make_shared<std::vector<T>>(std::move(values)));
    }

    const Shape& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(i); }
    int ndim() const { return (int)shape_.size(); }
    int64_t numel() const { return data_ ? (int64_t)data_->size() : 0; }
    bool defined() const { return (bool)data_; }

    T* ptr() { return data_->data(); }
    const T* ptr() const { return data_->data(); }
    T& operator[](int64_t i) { return (*data_)[i]; }
    const T& operator[](int64_t i) const { return (*data_)[i]; }

    Tensor clone() const {
        return Tensor(shape_, std::make_shared<std::vector<T>>(*data_));
    }

    // Shares data with this tensor.
    Tensor view(const Shape& s) const {
        if (shape_numel(s) != numel())
            throw TensorError("view numel mismatch: " + shape_str(shape_) + " -> " + shape_str(s));
        return Tensor(s, data_);
    }

    template <typename U>
    Tensor<U> cast() const {
        auto out = std::make_shared<std::vector<U>>(data_->size());
        for (size_t i = 0; i < data_->size(); ++i) (*out)[i] = (U)(*data_)[i];
        return Tensor<U>(shape_, std::move(out));
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (T v : *data_)
            if (!std::isfinite((double)v)) return false;
        return true;
    }

    T max_abs() const {
        T m = 0;
        for (T v : *data_) m = std::max(m, (T)std::abs((double)v));
        return m;
    }

private:
    Shape shape_;
    std::shared_ptr<std::vector<T>> data_;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw TensorError(msg);
}

}  // namespace reganie
