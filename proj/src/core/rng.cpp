#include "dcgan/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dcgan/errors.hpp"

namespace dcgan {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    auto splitmix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased and platform independent.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

namespace {

// One Box-Muller pair. u1 is shifted into (0, 1] so log never sees zero.
void box_muller(Rng& rng, double& a, double& b) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    a = r * std::cos(theta);
    b = r * std::sin(theta);
}

}  // namespace

double Rng::normal() {
    double a, b;
    box_muller(*this, a, b);
    return a;
}

void Rng::fill_normal(std::span<double> out, double mean, double stddev) {
    std::size_t i = 0;
    for (; i + 1 < out.size(); i += 2) {
        double a, b;
        box_muller(*this, a, b);
        out[i] = mean + stddev * a;
        out[i + 1] = mean + stddev * b;
    }
    if (i < out.size()) out[i] = mean + stddev * normal();
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    std::mt19937_64 engine;
    is >> engine;
    if (is.fail()) throw ParseError("malformed RNG state");
    engine_ = engine;
}

}  // namespace dcgan
