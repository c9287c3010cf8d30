#include "dcgan/parameters.hpp"

#include <algorithm>

#include "dcgan/errors.hpp"

namespace dcgan {

void ParameterSet::add(std::string name, Tensor value) {
    if (find(name)) throw ValidationError("duplicate parameter name '" + name + "'");
    entries_.push_back({std::move(name), std::move(value)});
}

std::size_t ParameterSet::element_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

Tensor& ParameterSet::at(std::string_view name) {
    return const_cast<Tensor&>(std::as_const(*this).at(name));
}

const Tensor& ParameterSet::at(std::string_view name) const {
    if (const Tensor* t = find(name)) return *t;
    throw ValidationError("no parameter named '" + std::string(name) + "'");
}

const Tensor* ParameterSet::find(std::string_view name) const {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
    return it == entries_.end() ? nullptr : &it->value;
}

ParameterSet ParameterSet::zeros_like() const {
    ParameterSet out;
    for (const auto& e : entries_) out.add(e.name, Tensor(e.value.shape()));
    return out;
}

void ParameterSet::require_same_layout(const ParameterSet& other, std::string_view what) const {
    if (other.size() != size())
        throw DimensionError(std::string(what) + ": expected " + std::to_string(size()) + " tensors, got " +
                             std::to_string(other.size()));
    for (std::size_t i = 0; i < size(); ++i) {
        const auto& a = entries_[i];
        const auto& b = other[i];
        if (a.name != b.name || a.value.shape() != b.value.shape())
            throw DimensionError(std::string(what) + ": entry " + std::to_string(i) + " is '" + b.name + "' " +
                                 shape_to_string(b.value.shape()) + ", expected '" + a.name + "' " +
                                 shape_to_string(a.value.shape()));
    }
}

bool bit_identical(const ParameterSet& a, const ParameterSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].name != b[i].name || !bit_identical(a[i].value, b[i].value)) return false;
    return true;
}

}  // namespace dcgan
