#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seqnp/errors.hpp"

namespace seqnp {

// Dense row-major tensor of doubles. Immutable by convention once built:
// operations return new tensors, they never mutate inputs in place.
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), values_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (count(shape_) != values_.size()) {
            throw ShapeError("Tensor: shape " + shape_string(shape_) + " wants " +
                             std::to_string(count(shape_)) + " values, got " +
                             std::to_string(values_.size()));
        }
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : t.values_) x = v;
        return t;
    }

    // 1 x n row matrix, the canonical layout for vectors in the model code.
    static Tensor row(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor({1, n}, std::move(values));
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.values_[i * n + i] = 1.0;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::size_t rows() const {
        require_matrix("rows()");
        return shape_[0];
    }
    std::size_t cols() const {
        require_matrix("cols()");
        return shape_[1];
    }

    bool is_scalar() const { return numel() == 1; }

    double scalar_value() const {
        if (!is_scalar()) {
            throw ContractError("scalar_value: tensor has shape " + shape_string(shape_));
        }
        return values_[0];
    }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    double operator()(std::size_t i, std::size_t j) const {
        return values_[i * shape_[1] + j];
    }
    double& operator()(std::size_t i, std::size_t j) {
        return values_[i * shape_[1] + j];
    }

    const double* data() const { return values_.data(); }
    double* data() { return values_.data(); }
    const std::vector<double>& values() const { return values_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : values_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && values_ == other.values_;
    }
    bool operator!=(const Tensor& other) const { return !(*this == other); }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) os << "x";
            os << shape[i];
        }
        os << "]";
        return os.str();
    }

  private:
    void require_matrix(const char* who) const {
        if (shape_.size() != 2) {
            throw ContractError(std::string(who) + ": tensor has shape " + shape_string(shape_));
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

namespace detail {

// C = A(m x k) * B(k x n). ikj order keeps the inner loop contiguous.
inline void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(m x n) += A(m x k) * B(n x k)^T, i.e. row-by-row dot products.
inline void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m,
                        std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C(k x n) += A(m x k)^T * B(m x n).
inline void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                        std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < m; ++p) {
        const double* arow = a + p * k;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < k; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

}  // namespace seqnp
