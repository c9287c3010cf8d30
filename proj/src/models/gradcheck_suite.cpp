#include "dcgan/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dcgan/models.hpp"
#include "dcgan/ops.hpp"
#include "dcgan/rng.hpp"

namespace dcgan {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double stddev = 1.0) {
    Tensor t(std::move(shape));
    rng.fill_normal(t.values(), 0.0, stddev);
    return t;
}

// Values bounded away from zero so a finite-difference step never crosses the leaky_relu kink.
Tensor random_away_from_zero(Rng& rng, Shape shape) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) {
        const double mag = rng.uniform(0.05, 1.5);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

double weighted_sum(const Tensor& t, const Tensor& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * weights[i];
    return s;
}

// Weights ~ N(0, 1/fan_in), biases ~ N(0, 0.1^2): O(1) activations through every layer.
void randomize(ParameterSet& params, std::uint64_t seed) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& t = params[i].value;
        Rng rng(mix_seed(seed, 0x9c, i));
        if (t.rank() == 1) {
            rng.fill_normal(t.values(), 0.0, 0.1);
        } else {
            const std::size_t fan_in = t.rank() == 4 ? t.size() / t.dim(0) : t.dim(0);
            rng.fill_normal(t.values(), 0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
        }
    }
}

class SuiteRunner {
public:
    explicit SuiteRunner(const GradcheckSuiteOptions& options) : options_(options) {
        report_.tolerance = options.tolerance;
    }

    void record(const std::string& subject, const GradcheckReport& r) {
        for (const auto& e : r.entries) report_.rows.push_back({subject, e});
    }

    GradcheckReport check(ParameterSet& inputs, const std::function<double()>& loss, const ParameterSet& analytic) {
        GradcheckOptions o;
        o.step = options_.step;
        return gradcheck(inputs, loss, analytic, options_.tolerance, o);
    }

    void conv_case(const std::string& subject, Rng& rng, Shape in_shape, std::size_t out_ch, std::size_t k,
                   std::size_t stride, std::size_t pad) {
        ParameterSet in;
        in.add("input", random_tensor(rng, in_shape));
        in.add("kernel", random_tensor(rng, {out_ch, in_shape[1], k, k}));
        in.add("bias", random_tensor(rng, {out_ch}));
        const Tensor probe = conv2d(in.at("input"), in.at("kernel"), in.at("bias"), stride, pad);
        const Tensor weights = random_tensor(rng, probe.shape());
        auto loss = [&] { return weighted_sum(conv2d(in.at("input"), in.at("kernel"), in.at("bias"), stride, pad), weights); };
        Conv2dGrads g = conv2d_backward(weights, in.at("input"), in.at("kernel"), stride, pad);
        ParameterSet analytic;
        analytic.add("input", g.input);
        analytic.add("kernel", g.kernel);
        analytic.add("bias", g.bias);
        record(subject, check(in, loss, analytic));
    }

    void dense_case(Rng& rng) {
        ParameterSet in;
        in.add("input", random_tensor(rng, {4, 3}));
        in.add("weight", random_tensor(rng, {3, 2}));
        in.add("bias", random_tensor(rng, {2}));
        const Tensor weights = random_tensor(rng, {4, 2});
        auto loss = [&] { return weighted_sum(dense(in.at("input"), in.at("weight"), in.at("bias")), weights); };
        DenseGrads g = dense_backward(weights, in.at("input"), in.at("weight"));
        ParameterSet analytic;
        analytic.add("input", g.input);
        analytic.add("weight", g.weight);
        analytic.add("bias", g.bias);
        record("dense", check(in, loss, analytic));
    }

    void upsample_case(Rng& rng) {
        ParameterSet in;
        in.add("input", random_tensor(rng, {2, 3, 3, 4}));
        const Tensor weights = random_tensor(rng, {2, 3, 6, 8});
        auto loss = [&] { return weighted_sum(upsample_nearest_2x(in.at("input")), weights); };
        ParameterSet analytic;
        analytic.add("input", upsample_nearest_2x_backward(weights));
        record("upsample_nearest_2x", check(in, loss, analytic));
    }

    void activation_case(const std::string& subject, const Activation& act, Rng& rng) {
        ParameterSet in;
        in.add("input", random_away_from_zero(rng, {3, 7}));
        const Tensor weights = random_tensor(rng, {3, 7});
        auto loss = [&] { return weighted_sum(activate(act, in.at("input")), weights); };
        const Tensor out = activate(act, in.at("input"));
        ParameterSet analytic;
        analytic.add("input", activate_backward(act, in.at("input"), out, weights));
        record(subject, check(in, loss, analytic));
    }

    void bce_cases(Rng& rng) {
        Tensor target({16});
        for (double& y : target.values()) y = rng.uniform() < 0.5 ? 0.0 : 1.0;
        {
            ParameterSet in;
            Tensor pred({16});
            for (double& p : pred.values()) p = rng.uniform(0.05, 0.95);
            in.add("pred", pred);
            auto loss = [&] { return bce_loss(in.at("pred"), target).loss; };
            ParameterSet analytic;
            analytic.add("pred", bce_loss(in.at("pred"), target).grad);
            record("bce_loss", check(in, loss, analytic));
        }
        {
            ParameterSet in;
            in.add("logits", random_tensor(rng, {16}, 3.0));
            auto loss = [&] { return bce_with_logits(in.at("logits"), target).loss; };
            ParameterSet analytic;
            analytic.add("logits", bce_with_logits(in.at("logits"), target).grad);
            record("bce_with_logits", check(in, loss, analytic));
        }
    }

    void generator_case(Rng& rng) {
        GeneratorSpec spec;
        spec.z_dim = options_.z_dim;
        spec.base_channels = options_.base_channels;
        spec.img_size = options_.img_size;
        Generator g = build_generator(spec, options_.seed);
        randomize(g.params.tensors, options_.seed);
        const Tensor z = random_tensor(rng, {options_.batch, spec.z_dim});
        GeneratorTape tape;
        const Tensor out = generator_forward(g, z, &tape);
        const Tensor weights = random_tensor(rng, out.shape());
        const ParameterSet analytic = generator_backward(g, tape, weights);
        auto loss = [&] { return weighted_sum(generator_forward(g, z), weights); };
        record("generator", check(g.params.tensors, loss, analytic));
    }

    void discriminator_case(Rng& rng) {
        DiscriminatorSpec spec;
        spec.base_channels = options_.base_channels;
        spec.img_size = options_.img_size;
        Discriminator d = build_discriminator(spec, options_.seed);
        randomize(d.params.tensors, options_.seed + 1);
        Tensor images({options_.batch, spec.in_channels, spec.img_size, spec.img_size});
        for (double& v : images.values()) v = rng.uniform(-1.0, 1.0);
        Tensor target({options_.batch, 1});
        for (std::size_t i = 0; i < target.size(); ++i) target[i] = static_cast<double>(i % 2);

        DiscriminatorTape tape;
        const DiscriminatorOutput fwd = discriminator_forward(d, images, &tape);
        const LossResult l = bce_with_logits(fwd.logits, target);
        DiscriminatorGrads grads = discriminator_backward(d, tape, fwd, l.grad, true, true);

        ParameterSet input;
        input.add("input", images);
        auto loss = [&] { return bce_with_logits(discriminator_forward(d, input.at("input")).logits, target).loss; };
        record("discriminator", check(d.params.tensors, loss, grads.params));
        ParameterSet input_grad;
        input_grad.add("input", grads.input);
        record("discriminator", check(input, loss, input_grad));
    }

    GradcheckSuiteReport finish() { return std::move(report_); }

private:
    GradcheckSuiteOptions options_;
    GradcheckSuiteReport report_;
};

}  // namespace

bool GradcheckSuiteReport::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.entry.pass; });
}

std::string GradcheckSuiteReport::table() const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-22s %-22s %8s %14s  %s\n", "subject", "tensor", "checked", "max_rel_err",
                  "result");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-22s %-22s %8zu %14.3e  %s\n", r.subject.c_str(), r.entry.name.c_str(),
                      r.entry.checked, r.entry.max_relative_error, r.entry.pass ? "PASS" : "FAIL");
        os << line;
    }
    std::snprintf(line, sizeof line, "tolerance %.1e: %s\n", tolerance, all_pass() ? "ALL PASS" : "FAILURES");
    os << line;
    return os.str();
}

GradcheckSuiteReport run_gradcheck_suite(const GradcheckSuiteOptions& options) {
    SuiteRunner runner(options);
    Rng rng(mix_seed(options.seed, 0x6c));
    runner.conv_case("conv2d(k3,s2,p1)", rng, {1, 2, 5, 5}, 3, 3, 2, 1);
    runner.conv_case("conv2d(k3,s1,p1)", rng, {2, 3, 4, 4}, 2, 3, 1, 1);
    runner.conv_case("conv2d(k4,s2,p1)", rng, {2, 2, 8, 8}, 3, 4, 2, 1);
    runner.dense_case(rng);
    runner.upsample_case(rng);
    runner.activation_case("leaky_relu", Activation::leaky_relu(0.2), rng);
    runner.activation_case("tanh", Activation::tanh(), rng);
    runner.activation_case("sigmoid", Activation::sigmoid(), rng);
    runner.bce_cases(rng);
    runner.generator_case(rng);
    runner.discriminator_case(rng);
    return runner.finish();
}

}  // namespace dcgan
