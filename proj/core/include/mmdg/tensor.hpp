#pragma once

#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "mmdg/error.hpp"

namespace mmdg {

/// Dense row-major tensor of rank 0..2. Rank 0 is a scalar stored as one
/// element. Float in training, double in verification mode; every numeric
/// routine in the project is templated on the scalar so both instantiations
/// share one code path.
template <typename S>
class TensorT {
  public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
        size_t n = 1;
        for (int e : shape_) {
            if (e <= 0) throw ShapeError("extent must be positive, got " + shape_str(shape_));
            n *= static_cast<size_t>(e);
        }
        data_.assign(n, S(0));
    }

    TensorT(std::vector<int> shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
        size_t n = 1;
        for (int e : shape_) {
            if (e <= 0) throw ShapeError("extent must be positive, got " + shape_str(shape_));
            n *= static_cast<size_t>(e);
        }
        if (n != data_.size())
            throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_str(shape_));
    }

    static TensorT scalar(S v) { return TensorT({}, {v}); }

    static TensorT vec(std::vector<S> data) {
        const int n = static_cast<int>(data.size());
        return TensorT({n}, std::move(data));
    }

    static TensorT matrix(int rows, int cols, std::vector<S> data) { return TensorT({rows, cols}, std::move(data)); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    size_t size() const { return data_.size(); }

    int rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? shape_[0] : 1); }
    int cols() const { return rank() == 2 ? shape_[1] : 1; }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& values() { return data_; }
    const std::vector<S>& values() const { return data_; }

    S& operator[](size_t i) { return data_[i]; }
    S operator[](size_t i) const { return data_[i]; }

    S& at(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
    S at(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }

    S item() const {
        if (data_.size() != 1) throw ShapeError("item() on tensor of size " + std::to_string(data_.size()));
        return data_[0];
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    void fill(S v) { data_.assign(data_.size(), v); }

    std::string shape_str() const { return shape_str(shape_); }

    static std::string shape_str(const std::vector<int>& s) {
        std::ostringstream os;
        os << '(';
        for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << ')';
        return os.str();
    }

    template <typename T>
    TensorT<T> cast() const {
        std::vector<T> out(data_.size());
        for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
        return TensorT<T>(shape_, std::move(out));
    }

  private:
    std::vector<int> shape_;
    std::vector<S> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace mmdg
