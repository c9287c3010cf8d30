#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dcgan/gradcheck.hpp"

namespace dcgan {

struct GradcheckSuiteOptions {
    double tolerance = 1e-4;
    double step = 1e-5;
    std::size_t img_size = 16;
    std::size_t batch = 2;
    // Narrow networks keep the full-network check to a few seconds; the
    // topology (block count, kernels, strides) is the same as at width 64.
    std::size_t base_channels = 4;
    std::size_t z_dim = 100;
    std::uint64_t seed = 0;
};

struct GradcheckRow {
    std::string subject;  // operation or network under test
    GradcheckEntry entry;
};

struct GradcheckSuiteReport {
    double tolerance = 0.0;
    std::vector<GradcheckRow> rows;

    bool all_pass() const;
    /// Fixed-width PASS/FAIL table, one row per checked tensor.
    std::string table() const;
};

/// Finite-difference check of every differentiable operation and of both
/// full networks, with randomized parameters so every nonlinearity is exercised.
GradcheckSuiteReport run_gradcheck_suite(const GradcheckSuiteOptions& options = {});

}  // namespace dcgan
