#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dcgan/tensor.hpp"

namespace dcgan {

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Ordered, uniquely named tensors. Insertion order is iteration order, and
/// serialization and optimizer state both rely on it.
class ParameterSet {
public:
    void add(std::string name, Tensor value);

    std::size_t size() const { return entries_.size(); }
    std::size_t element_count() const;

    NamedTensor& operator[](std::size_t i) { return entries_[i]; }
    const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }

    /// Throws ValidationError if absent.
    Tensor& at(std::string_view name);
    const Tensor& at(std::string_view name) const;
    const Tensor* find(std::string_view name) const;

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    /// Same names, shapes and order, all values zero.
    ParameterSet zeros_like() const;
    /// Throws DimensionError unless `other` has the same names, shapes and order.
    void require_same_layout(const ParameterSet& other, std::string_view what) const;

private:
    std::vector<NamedTensor> entries_;
};

bool bit_identical(const ParameterSet& a, const ParameterSet& b);

}  // namespace dcgan
