#include "lrd/tensor.hpp"

#include <limits>
#include <sstream>

namespace lrd {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& dims)
{
    std::size_t total = 1;
    for (std::size_t d : dims) {
        if (d == 0)
            throw ShapeError("shape extents must be positive");
        if (total > std::numeric_limits<std::size_t>::max() / d)
            throw ShapeError("shape element count overflows");
        total *= d;
    }
    return total;
}

}  // namespace

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims))
{
    if (dims_.empty())
        throw ShapeError("shape must have at least one mode");
    total_ = checked_product(dims_);
}

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

std::size_t Shape::lambda(std::size_t mode) const
{
    return total_ / dims_.at(mode);
}

std::size_t Shape::stride(std::size_t mode) const
{
    std::size_t s = 1;
    for (std::size_t t = 0; t < mode; ++t)
        s *= dims_.at(t);
    return s;
}

std::size_t Shape::linear_index(std::span<const std::size_t> index) const
{
    if (index.size() != dims_.size())
        throw ShapeError("multi-index has " + std::to_string(index.size()) + " entries for shape " +
                         to_string());
    std::size_t linear = 0;
    std::size_t stride = 1;
    for (std::size_t n = 0; n < dims_.size(); ++n) {
        if (index[n] >= dims_[n])
            throw ShapeError("multi-index out of range for shape " + to_string());
        linear += index[n] * stride;
        stride *= dims_[n];
    }
    return linear;
}

std::vector<std::size_t> Shape::multi_index(std::size_t linear) const
{
    std::vector<std::size_t> index(dims_.size());
    for (std::size_t n = 0; n < dims_.size(); ++n) {
        index[n] = linear % dims_[n];
        linear /= dims_[n];
    }
    return index;
}

Shape Shape::drop_last() const
{
    if (dims_.size() < 2)
        throw ShapeError("cannot drop the only mode of " + to_string());
    return Shape(std::vector<std::size_t>(dims_.begin(), dims_.end() - 1));
}

Shape Shape::append(std::size_t extent) const
{
    auto dims = dims_;
    dims.push_back(extent);
    return Shape(std::move(dims));
}

std::string Shape::to_string() const
{
    std::ostringstream os;
    for (std::size_t n = 0; n < dims_.size(); ++n)
        os << (n ? "x" : "") << dims_[n];
    return os.str();
}

KruskalTensor::KruskalTensor(Shape shape, std::vector<Eigen::MatrixXd> factors)
    : shape_(std::move(shape)), factors_(std::move(factors))
{
    if (factors_.size() != shape_.order())
        throw ShapeError("kruskal tensor needs one factor per mode");
    if (factors_.front().cols() < 1)
        throw ShapeError("kruskal rank must be at least 1");
    for (std::size_t n = 0; n < factors_.size(); ++n) {
        if (static_cast<std::size_t>(factors_[n].rows()) != shape_.dim(n) ||
            factors_[n].cols() != factors_.front().cols())
            throw ShapeError("kruskal factor " + std::to_string(n) + " must be " +
                             std::to_string(shape_.dim(n)) + "x" +
                             std::to_string(factors_.front().cols()));
    }
}

KruskalTensor KruskalTensor::zeros(const Shape& shape, std::size_t rank)
{
    std::vector<Eigen::MatrixXd> factors;
    factors.reserve(shape.order());
    for (std::size_t d : shape.dims())
        factors.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rank)));
    return KruskalTensor(shape, std::move(factors));
}

void KruskalTensor::set_factor(std::size_t mode, Eigen::MatrixXd value)
{
    auto& slot = factors_.at(mode);
    if (value.rows() != slot.rows() || value.cols() != slot.cols())
        throw ShapeError("set_factor: dimensions do not match mode " + std::to_string(mode));
    slot = std::move(value);
}

DenseTensor kruskal_reconstruct(const KruskalTensor& k)
{
    return reconstruct_factors<double>(k.shape(), k.factors());
}

Eigen::MatrixXd build_q(const KruskalTensor& k, std::size_t mode)
{
    return build_q<double>(k.factors(), mode);
}

}  // namespace lrd
