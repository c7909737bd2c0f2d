#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ttt4rec/error.hpp"

namespace ttt4rec {

// Dense real-valued array in row-major order. Rank 0 (shape {}) is a scalar
// with one element. Carries no gradient state; traces own that.
template <class S>
class TensorT {
  public:
    TensorT() : shape_{}, data_(1, S(0)) {}

    explicit TensorT(std::vector<int64_t> shape)
        : shape_(std::move(shape)), data_(checked_numel(shape_), S(0)) {}

    TensorT(std::vector<int64_t> shape, std::vector<S> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != checked_numel(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
        }
    }

    static TensorT zeros(std::vector<int64_t> shape) { return TensorT(std::move(shape)); }

    static TensorT full(std::vector<int64_t> shape, S v) {
        TensorT t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static TensorT scalar(S v) {
        TensorT t;
        t.data_[0] = v;
        return t;
    }

    static TensorT from(std::vector<int64_t> shape, std::initializer_list<S> values) {
        return TensorT(std::move(shape), std::vector<S>(values));
    }

    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    const std::vector<int64_t>& shape() const { return shape_; }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& values() { return data_; }
    const std::vector<S>& values() const { return data_; }

    S& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    S operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Rank-2 access: row i, column j.
    S& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    S at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    bool is_scalar() const { return numel() == 1 && rank() == 0; }

    bool all_finite() const {
        for (S v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    static std::string shape_string(const std::vector<int64_t>& shape) {
        std::ostringstream os;
        os << '(';
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) os << 'x';
            os << shape[i];
        }
        os << ')';
        return os.str();
    }

    std::string shape_string() const { return shape_string(shape_); }

  private:
    static int64_t checked_numel(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
            n *= d;
        }
        return n;
    }

    std::vector<int64_t> shape_;
    std::vector<S> data_;
};

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

}  // namespace ttt4rec
