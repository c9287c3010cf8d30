#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dcgan/parameters.hpp"

namespace dcgan {

struct GradcheckOptions {
    double step = 1e-5;  // central difference half-width
    /// 0 checks every element; otherwise a seeded subset of this many per tensor.
    std::size_t max_elements_per_tensor = 0;
    std::uint64_t sample_seed = 0;
};

struct GradcheckEntry {
    std::string name;
    std::size_t checked = 0;
    double max_relative_error = 0.0;
    bool pass = false;
};

struct GradcheckReport {
    double tolerance = 0.0;
    std::vector<GradcheckEntry> entries;

    bool all_pass() const;
    const GradcheckEntry& entry(const std::string& name) const;
};

/// Elementwise |a - n| / max(|a|, |n|, floor), where the floor is 1% of the
/// largest gradient magnitude in the tensor. A sign flip scores exactly 2.
double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Compares `analytic` against central finite differences of `loss`, which
/// must read the tensors in `inputs`; each element is perturbed in place and
/// restored bit-exactly. Failures are reported, never thrown.
GradcheckReport gradcheck(ParameterSet& inputs, const std::function<double()>& loss, const ParameterSet& analytic,
                          double tolerance, const GradcheckOptions& options = {});

}  // namespace dcgan
