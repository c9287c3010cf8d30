#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dcgan {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Every dimension is positive and `size() == product(shape)`. A
/// default-constructed tensor is the empty placeholder: rank 0, no storage.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor from(std::initializer_list<std::size_t> shape, std::initializer_list<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // NCHW accessors; no bounds checks beyond debug asserts.
    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

    /// Same storage order, new shape. Throws DimensionError if the element count differs.
    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    bool all_finite() const;
    /// Throws NumericalError naming `what` if any element is NaN or infinite.
    void require_finite(std::string_view what) const;

    void fill(double value);

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Bitwise equality of shape and payload (distinguishes -0.0 and NaN payloads).
bool bit_identical(const Tensor& a, const Tensor& b);

void require_rank(const Tensor& t, std::size_t rank, std::string_view what);

}  // namespace dcgan
