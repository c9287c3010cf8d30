#include "dcgan/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <sstream>

#include "dcgan/errors.hpp"

namespace dcgan {

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
    if (std::any_of(shape.begin(), shape.end(), [](std::size_t d) { return d == 0; }))
        throw DimensionError("tensor shape " + shape_to_string(shape) + " has a zero dimension");
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape(shape_);
    if (data_.size() != shape_product(shape_))
        throw DimensionError("tensor of shape " + shape_to_string(shape_) + " needs " +
                             std::to_string(shape_product(shape_)) + " values, got " +
                             std::to_string(data_.size()));
}

Tensor Tensor::from(std::initializer_list<std::size_t> shape, std::initializer_list<double> values) {
    return Tensor(Shape(shape), std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape_));
    return shape_[axis];
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    assert(shape_.size() == 4);
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    assert(shape_.size() == 4);
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
    validate_shape(shape);
    if (shape_product(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    shape_ = std::move(shape);
    return std::move(*this);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(std::string_view what) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i]))
            throw NumericalError(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
    }
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool bit_identical(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return a.size() == 0 || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void require_rank(const Tensor& t, std::size_t rank, std::string_view what) {
    if (t.rank() != rank)
        throw DimensionError(std::string(what) + " must have rank " + std::to_string(rank) + ", got shape " +
                             shape_to_string(t.shape()));
}

}  // namespace dcgan
