#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vggsvm {

/// Dense row-major n-dimensional array of doubles.
///
/// Used for images, activations, weights and gradients alike. Shapes are
/// fixed at construction; `reshape` reinterprets without copying data.
class Tensor
{
public:
    using Shape = std::vector<std::size_t>;

    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::initializer_list<std::size_t> index);
    [[nodiscard]] double at(std::initializer_list<std::size_t> index) const;

    /// Row `i` of the leading axis as a contiguous span.
    [[nodiscard]] std::span<double> row(std::size_t i);
    [[nodiscard]] std::span<const double> row(std::size_t i) const;

    /// Number of elements per leading-axis slice.
    [[nodiscard]] std::size_t row_size() const noexcept;

    void reshape(Shape shape);
    void fill(double value);

    [[nodiscard]] bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    [[nodiscard]] std::size_t offset(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<double> data_;
};

[[nodiscard]] std::size_t shape_product(const Tensor::Shape& shape) noexcept;
[[nodiscard]] std::string shape_to_string(const Tensor::Shape& shape);

}  // namespace vggsvm
