// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpt {

/// Dense row-major tensor of doubles. Rank 1 or 2 covers everything in this
/// project; spatial grids are stored flattened (HW x C).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), 0.0);
    }

    Tensor(std::size_t rows, std::size_t cols) : Tensor(std::vector<std::size_t>{rows, cols}) {}

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

    static Tensor full(std::size_t rows, std::size_t cols, double v) {
        Tensor t(rows, cols);
        t.fill(v);
        return t;
    }

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t[0] = v;
        return t;
    }

    static Tensor from_rows(std::size_t rows, std::size_t cols, std::vector<double> data) {
        if (data.size() != rows * cols) throw std::invalid_argument("tensor data size mismatch");
        Tensor t;
        t.shape_ = {rows, cols};
        t.data_ = std::move(data);
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const {
        assert(shape_.size() == 2);
        return shape_[0];
    }
    std::size_t cols() const {
        assert(shape_.size() == 2);
        return shape_[1];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double v) {
        for (auto& x : data_) x = v;
    }

    void add_inplace(const Tensor& o) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    }

    void scale_inplace(double c) {
        for (auto& x : data_) x *= c;
    }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    bool bit_equal(const Tensor& o) const {
        if (!same_shape(o)) return false;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            std::uint64_t a, b;
            static_assert(sizeof(double) == sizeof(std::uint64_t));
            __builtin_memcpy(&a, &data_[i], sizeof a);
            __builtin_memcpy(&b, &o.data_[i], sizeof b);
            if (a != b) return false;
        }
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

namespace kernels {

// Raw GEMM kernels on row-major buffers; C += or C = op(A, B).
// nn: C[m x n] = A[m x k] * B[k x n]
// nt: C[m x n] = A[m x k] * B[n x k]^T
// tn: C[m x n] = A[k x m]^T * B[k x n]
void matmul_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);

}  // namespace kernels

}  // namespace mpt
