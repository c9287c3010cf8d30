#include "dcgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcgan/errors.hpp"
#include "dcgan/rng.hpp"

namespace dcgan {

bool GradcheckReport::all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.pass; });
}

const GradcheckEntry& GradcheckReport::entry(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw ValidationError("gradcheck report has no entry '" + name + "'");
}

double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    if (analytic.size() != numeric.size()) throw DimensionError("gradient_relative_error: length mismatch");
    double scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    const double floor = std::max(1e-2 * scale, 1e-12);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        const double err = std::abs(analytic[i] - numeric[i]) / denom;
        if (std::isnan(err)) return err;
        worst = std::max(worst, err);
    }
    return worst;
}

GradcheckReport gradcheck(ParameterSet& inputs, const std::function<double()>& loss, const ParameterSet& analytic,
                          double tolerance, const GradcheckOptions& options) {
    if (!(tolerance > 0.0)) throw ValidationError("gradcheck tolerance must be positive");
    inputs.require_same_layout(analytic, "gradcheck analytic gradients");

    GradcheckReport report;
    report.tolerance = tolerance;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        auto values = inputs[t].value.values();
        const auto grad = analytic[t].value.values();

        std::vector<std::size_t> indices(values.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        if (options.max_elements_per_tensor && indices.size() > options.max_elements_per_tensor) {
            Rng rng(mix_seed(options.sample_seed, t));
            for (std::size_t i = 0; i < options.max_elements_per_tensor; ++i)
                std::swap(indices[i], indices[i + rng.below(indices.size() - i)]);
            indices.resize(options.max_elements_per_tensor);
            std::sort(indices.begin(), indices.end());
        }

        std::vector<double> a;
        std::vector<double> n;
        a.reserve(indices.size());
        n.reserve(indices.size());
        for (std::size_t idx : indices) {
            const double saved = values[idx];
            values[idx] = saved + options.step;
            const double up = loss();
            values[idx] = saved - options.step;
            const double down = loss();
            values[idx] = saved;
            a.push_back(grad[idx]);
            n.push_back((up - down) / (2.0 * options.step));
        }
        GradcheckEntry entry;
        entry.name = inputs[t].name;
        entry.checked = indices.size();
        entry.max_relative_error = gradient_relative_error(a, n);
        entry.pass = entry.max_relative_error < tolerance;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace dcgan
