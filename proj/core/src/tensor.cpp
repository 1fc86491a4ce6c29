#include "vggsvm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "vggsvm/error.hpp"

namespace vggsvm {

std::size_t shape_product(const Tensor::Shape& shape) noexcept
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_to_string(const Tensor::Shape& shape)
{
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i)
    {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data))
{
    if (shape_product(shape_) != data_.size())
        throw PreconditionError(
            "tensor shape " + shape_to_string(shape_) + " does not match " + std::to_string(data_.size()) +
            " values");
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const
{
    if (index.size() != shape_.size()) throw PreconditionError("tensor index rank mismatch");
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : index)
    {
        if (i >= shape_[axis]) throw PreconditionError("tensor index out of range");
        off = off * shape_[axis] + i;
        ++axis;
    }
    return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index)
{
    return data_[offset(index)];
}

double Tensor::at(std::initializer_list<std::size_t> index) const
{
    return data_[offset(index)];
}

std::size_t Tensor::row_size() const noexcept
{
    if (shape_.empty() || shape_[0] == 0) return 0;
    return data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t i)
{
    const std::size_t n = row_size();
    return std::span<double>(data_).subspan(i * n, n);
}

std::span<const double> Tensor::row(std::size_t i) const
{
    const std::size_t n = row_size();
    return std::span<const double>(data_).subspan(i * n, n);
}

void Tensor::reshape(Shape shape)
{
    if (shape_product(shape) != data_.size())
        throw PreconditionError(
            "cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    shape_ = std::move(shape);
}

void Tensor::fill(double value)
{
    std::fill(data_.begin(), data_.end(), value);
}

bool Tensor::all_finite() const noexcept
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace vggsvm
