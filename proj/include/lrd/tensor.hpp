#pragma once

#include "lrd/error.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lrd {

using Complex = std::complex<double>;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Extents I_1 x ... x I_N of a tensor. Modes are 0-based in code; the
/// storage order is mode-0 fastest (column-major over the multi-index).
class Shape {
public:
    explicit Shape(std::vector<std::size_t> dims);
    Shape(std::initializer_list<std::size_t> dims);

    std::size_t order() const { return dims_.size(); }
    std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t total_elements() const { return total_; }

    /// Product of every extent except `mode`.
    std::size_t lambda(std::size_t mode) const;

    /// Distance in storage between neighbours along `mode`.
    std::size_t stride(std::size_t mode) const;

    std::size_t linear_index(std::span<const std::size_t> index) const;
    std::vector<std::size_t> multi_index(std::size_t linear) const;

    /// Shape with the trailing mode removed (N >= 2).
    Shape drop_last() const;
    /// Shape with an extra trailing mode appended.
    Shape append(std::size_t extent) const;

    std::string to_string() const;

    bool operator==(const Shape& other) const { return dims_ == other.dims_; }

private:
    std::vector<std::size_t> dims_;
    std::size_t total_ = 0;
};

/// Dense N-order array with explicit shape, stored mode-0 fastest.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(shape_.total_elements(), T{}) {}

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        if (data_.size() != shape_.total_elements())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.to_string());
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::span<const T> data() const { return data_; }
    std::span<T> data() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::initializer_list<std::size_t> index)
    {
        return data_[shape_.linear_index(std::span<const std::size_t>(index.begin(), index.size()))];
    }
    const T& at(std::initializer_list<std::size_t> index) const
    {
        return data_[shape_.linear_index(std::span<const std::size_t>(index.begin(), index.size()))];
    }

    bool operator==(const BasicTensor& other) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using DenseTensor = BasicTensor<double>;

/// n-mode matricization: an I_n x Lambda matrix whose column index runs over
/// the remaining modes in ascending order, lowest mode fastest.
template <typename T>
struct Matricization {
    Matrix<T> matrix;
    std::size_t mode;
    Shape origin_shape;
};

template <typename T>
Matricization<T> unfold(const BasicTensor<T>& t, std::size_t mode)
{
    const Shape& shape = t.shape();
    if (mode >= shape.order())
        throw ShapeError("unfold: mode " + std::to_string(mode) + " out of range for order " +
                         std::to_string(shape.order()));
    const std::size_t rows = shape.dim(mode);
    const std::size_t stride = shape.stride(mode);
    const std::size_t block = stride * rows;
    Matrix<T> m(rows, shape.lambda(mode));
    const auto data = t.data();
    for (std::size_t l = 0; l < data.size(); ++l) {
        const std::size_t i = (l / stride) % rows;
        const std::size_t j = l % stride + (l / block) * stride;
        m(i, j) = data[l];
    }
    return {std::move(m), mode, shape};
}

template <typename T>
BasicTensor<T> fold(const Matricization<T>& m)
{
    const Shape& shape = m.origin_shape;
    if (m.mode >= shape.order())
        throw ShapeError("fold: mode out of range");
    const std::size_t rows = shape.dim(m.mode);
    if (static_cast<std::size_t>(m.matrix.rows()) != rows ||
        static_cast<std::size_t>(m.matrix.cols()) != shape.lambda(m.mode))
        throw ShapeError("fold: matrix dimensions do not match shape " + shape.to_string());
    const std::size_t stride = shape.stride(m.mode);
    const std::size_t block = stride * rows;
    BasicTensor<T> t(shape);
    auto data = t.data();
    for (std::size_t l = 0; l < data.size(); ++l) {
        const std::size_t i = (l / stride) % rows;
        const std::size_t j = l % stride + (l / block) * stride;
        data[l] = m.matrix(i, j);
    }
    return t;
}

/// Column-wise Kronecker product: column r of the result is a_r (x) b_r.
template <typename T>
Matrix<T> khatri_rao(const Matrix<T>& a, const Matrix<T>& b)
{
    if (a.cols() != b.cols())
        throw ShapeError("khatri_rao: column counts differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + ")");
    const Eigen::Index ib = b.rows();
    Matrix<T> out(a.rows() * ib, a.cols());
    for (Eigen::Index r = 0; r < a.cols(); ++r)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            out.col(r).segment(i * ib, ib) = a(i, r) * b.col(r);
    return out;
}

template <typename T>
Matrix<T> kronecker(const Matrix<T>& a, const Matrix<T>& b)
{
    Matrix<T> out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Q for `mode`: X_{N-1} (.) ... (.) X_{mode+1} (.) X_{mode-1} (.) ... (.) X_0.
/// Its row index matches the column index of unfold(., mode). Requires N >= 2.
template <typename T>
Matrix<T> build_q(std::span<const Matrix<T>> factors, std::size_t mode)
{
    const std::size_t order = factors.size();
    if (order < 2)
        throw ShapeError("build_q: undefined for first-order tensors");
    if (mode >= order)
        throw ShapeError("build_q: mode out of range");
    Matrix<T> q;
    bool first = true;
    for (std::size_t k = order; k-- > 0;) {
        if (k == mode)
            continue;
        if (first) {
            q = factors[k];
            first = false;
        } else {
            q = khatri_rao<T>(q, factors[k]);
        }
    }
    return q;
}

/// Sum over r of the outer products of column r of every factor.
template <typename T>
BasicTensor<T> reconstruct_factors(const Shape& shape, std::span<const Matrix<T>> factors)
{
    if (factors.size() != shape.order())
        throw ShapeError("reconstruct: factor count does not match tensor order");
    for (std::size_t n = 0; n < factors.size(); ++n)
        if (static_cast<std::size_t>(factors[n].rows()) != shape.dim(n) ||
            factors[n].cols() != factors[0].cols())
            throw ShapeError("reconstruct: factor " + std::to_string(n) + " has wrong dimensions");
    if (factors.size() == 1) {
        Matrix<T> col = factors[0].rowwise().sum();
        return BasicTensor<T>(shape, std::vector<T>(col.data(), col.data() + col.size()));
    }
    // Mode-0 unfolding X_0 Q_0^T is the storage layout itself.
    Matrix<T> unfolded = factors[0] * build_q<T>(factors, 0).transpose();
    return BasicTensor<T>(shape, std::vector<T>(unfolded.data(), unfolded.data() + unfolded.size()));
}

/// Rank-R tensor held as N factor matrices of size I_n x R.
class KruskalTensor {
public:
    KruskalTensor(Shape shape, std::vector<Eigen::MatrixXd> factors);

    /// All-zero factors.
    static KruskalTensor zeros(const Shape& shape, std::size_t rank);

    const Shape& shape() const { return shape_; }
    std::size_t order() const { return factors_.size(); }
    std::size_t rank() const { return static_cast<std::size_t>(factors_.front().cols()); }

    const Eigen::MatrixXd& factor(std::size_t mode) const { return factors_.at(mode); }
    const std::vector<Eigen::MatrixXd>& factors() const { return factors_; }
    void set_factor(std::size_t mode, Eigen::MatrixXd value);

private:
    Shape shape_;
    std::vector<Eigen::MatrixXd> factors_;
};

DenseTensor kruskal_reconstruct(const KruskalTensor& k);

Eigen::MatrixXd build_q(const KruskalTensor& k, std::size_t mode);

}  // namespace lrd
