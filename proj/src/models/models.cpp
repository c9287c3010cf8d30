#include "dcgan/models.hpp"

#include <sstream>

#include "dcgan/errors.hpp"
#include "dcgan/ops.hpp"
#include "dcgan/rng.hpp"

namespace dcgan {

namespace {

constexpr std::size_t kBlocks = 4;
constexpr std::size_t kGenKernel = 3;
constexpr std::size_t kDiscKernel = 4;
constexpr double kInitStd = 0.02;

std::string block_name(std::size_t i, const char* suffix) {
    return "block" + std::to_string(i + 1) + ".conv." + suffix;
}

void validate_common(std::size_t img_size, double alpha, const char* who) {
    if (img_size < 16 || img_size % 16 != 0)
        throw SpecError(std::string(who) + ": img_size must be a positive multiple of 16, got " +
                        std::to_string(img_size));
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw SpecError(std::string(who) + ": leaky_relu slope must lie in [0, 1)");
}

// Layout of a freshly built generator (zeros), in serialization order.
ParameterSet generator_layout(const GeneratorSpec& s) {
    const std::size_t m = s.initial_extent();
    ParameterSet p;
    p.add("proj.weight", Tensor({s.z_dim, s.initial_channels() * m * m}));
    p.add("proj.bias", Tensor({s.initial_channels() * m * m}));
    std::size_t in = s.initial_channels();
    for (std::size_t i = 0; i < kBlocks; ++i) {
        const std::size_t out = in / 2;
        p.add(block_name(i, "weight"), Tensor({out, in, kGenKernel, kGenKernel}));
        p.add(block_name(i, "bias"), Tensor({out}));
        in = out;
    }
    p.add("out.conv.weight", Tensor({s.out_channels, in, kGenKernel, kGenKernel}));
    p.add("out.conv.bias", Tensor({s.out_channels}));
    return p;
}

ParameterSet discriminator_layout(const DiscriminatorSpec& s) {
    ParameterSet p;
    std::size_t in = s.in_channels;
    std::size_t out = s.base_channels;
    for (std::size_t i = 0; i < kBlocks; ++i) {
        p.add(block_name(i, "weight"), Tensor({out, in, kDiscKernel, kDiscKernel}));
        p.add(block_name(i, "bias"), Tensor({out}));
        in = out;
        out *= 2;
    }
    p.add("head.weight", Tensor({s.feature_dim(), 1}));
    p.add("head.bias", Tensor({1}));
    return p;
}

NetworkParams wrap(ParameterSet tensors, std::string topology) {
    NetworkParams params;
    params.tensors = std::move(tensors);
    params.fingerprint = fingerprint_of(topology);
    params.topology = std::move(topology);
    return params;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void GeneratorSpec::validate() const {
    validate_common(img_size, leaky_alpha, "generator");
    if (z_dim == 0) throw SpecError("generator: z_dim must be positive");
    if (out_channels == 0) throw SpecError("generator: out_channels must be positive");
    if (base_channels < 2 || base_channels % 2 != 0)
        throw SpecError("generator: base_channels must be even and >= 2 (widths halve four times from 8*base)");
}

std::string GeneratorSpec::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "generator z_dim=" << z_dim << " base_channels=" << base_channels << " img_size=" << img_size
       << " out_channels=" << out_channels << " leaky_alpha=" << leaky_alpha;
    return os.str();
}

void DiscriminatorSpec::validate() const {
    validate_common(img_size, leaky_alpha, "discriminator");
    if (base_channels == 0) throw SpecError("discriminator: base_channels must be positive");
    if (in_channels == 0) throw SpecError("discriminator: in_channels must be positive");
}

std::size_t DiscriminatorSpec::feature_dim() const {
    const std::size_t m = img_size / 16;
    return base_channels * 8 * m * m;
}

std::string DiscriminatorSpec::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "discriminator base_channels=" << base_channels << " img_size=" << img_size
       << " in_channels=" << in_channels << " leaky_alpha=" << leaky_alpha;
    return os.str();
}

std::uint64_t fingerprint_of(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void init_weights(ParameterSet& params, std::uint64_t seed) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& entry = params[i];
        if (ends_with(entry.name, ".bias")) {
            entry.value.fill(0.0);
        } else {
            Rng rng(mix_seed(seed, 0x1417, i));
            rng.fill_normal(entry.value.values(), 0.0, kInitStd);
        }
    }
}

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParameterSet tensors = generator_layout(spec);
    init_weights(tensors, seed);
    return Generator{spec, wrap(std::move(tensors), spec.describe())};
}

Discriminator build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParameterSet tensors = discriminator_layout(spec);
    init_weights(tensors, seed);
    return Discriminator{spec, wrap(std::move(tensors), spec.describe())};
}

std::size_t generator_parameter_count(const GeneratorSpec& spec) {
    spec.validate();
    return generator_layout(spec).element_count();
}

std::size_t discriminator_parameter_count(const DiscriminatorSpec& spec) {
    spec.validate();
    return discriminator_layout(spec).element_count();
}

Generator make_generator(const GeneratorSpec& spec, ParameterSet tensors) {
    spec.validate();
    generator_layout(spec).require_same_layout(tensors, "generator parameters");
    return Generator{spec, wrap(std::move(tensors), spec.describe())};
}

Discriminator make_discriminator(const DiscriminatorSpec& spec, ParameterSet tensors) {
    spec.validate();
    discriminator_layout(spec).require_same_layout(tensors, "discriminator parameters");
    return Discriminator{spec, wrap(std::move(tensors), spec.describe())};
}

Tensor generator_forward(const Generator& g, const Tensor& z, GeneratorTape* tape) {
    const auto& s = g.spec;
    const auto& p = g.params.tensors;
    require_rank(z, 2, "generator latent batch");
    if (z.dim(1) != s.z_dim)
        throw DimensionError("generator expects z_dim=" + std::to_string(s.z_dim) + ", got " +
                             std::to_string(z.dim(1)));
    const std::size_t n = z.dim(0);
    const std::size_t m = s.initial_extent();
    const Activation leaky = Activation::leaky_relu(s.leaky_alpha);

    Tensor x = dense(z, p.at("proj.weight"), p.at("proj.bias")).reshaped({n, s.initial_channels(), m, m});
    if (tape) {
        tape->z = z;
        tape->blocks.clear();
    }
    for (std::size_t i = 0; i < kBlocks; ++i) {
        Tensor up = upsample_nearest_2x(x);
        Tensor pre = conv2d(up, p.at(block_name(i, "weight")), p.at(block_name(i, "bias")), 1, 1);
        x = activate(leaky, pre);
        if (tape) tape->blocks.push_back({std::move(up), std::move(pre), x});
    }
    Tensor pre = conv2d(x, p.at("out.conv.weight"), p.at("out.conv.bias"), 1, 1);
    Tensor out = activate(Activation::tanh(), pre);
    if (tape) {
        tape->out_pre_activation = std::move(pre);
        tape->output = out;
    }
    return out;
}

ParameterSet generator_backward(const Generator& g, const GeneratorTape& tape, const Tensor& grad_output) {
    const auto& s = g.spec;
    const auto& p = g.params.tensors;
    if (tape.blocks.size() != kBlocks) throw ValidationError("generator_backward: tape was not recorded");
    if (grad_output.shape() != tape.output.shape())
        throw DimensionError("generator_backward: gradient shape " + shape_to_string(grad_output.shape()) +
                             " does not match output " + shape_to_string(tape.output.shape()));
    const Activation leaky = Activation::leaky_relu(s.leaky_alpha);

    ParameterSet grads = p.zeros_like();
    Tensor grad = activate_backward(Activation::tanh(), tape.out_pre_activation, tape.output, grad_output);
    {
        Conv2dGrads cg = conv2d_backward(grad, tape.blocks.back().activation, p.at("out.conv.weight"), 1, 1);
        grads.at("out.conv.weight") = std::move(cg.kernel);
        grads.at("out.conv.bias") = std::move(cg.bias);
        grad = std::move(cg.input);
    }
    for (std::size_t i = kBlocks; i-- > 0;) {
        const auto& block = tape.blocks[i];
        grad = activate_backward(leaky, block.pre_activation, block.activation, grad);
        Conv2dGrads cg = conv2d_backward(grad, block.upsampled, p.at(block_name(i, "weight")), 1, 1);
        grads.at(block_name(i, "weight")) = std::move(cg.kernel);
        grads.at(block_name(i, "bias")) = std::move(cg.bias);
        grad = upsample_nearest_2x_backward(cg.input);
    }
    const std::size_t n = tape.z.dim(0);
    grad = std::move(grad).reshaped({n, grad.size() / n});
    DenseGrads dg = dense_backward(grad, tape.z, p.at("proj.weight"), false);
    grads.at("proj.weight") = std::move(dg.weight);
    grads.at("proj.bias") = std::move(dg.bias);
    return grads;
}

DiscriminatorOutput discriminator_forward(const Discriminator& d, const Tensor& images, DiscriminatorTape* tape) {
    const auto& s = d.spec;
    const auto& p = d.params.tensors;
    require_rank(images, 4, "discriminator input");
    if (images.dim(1) != s.in_channels || images.dim(2) != s.img_size || images.dim(3) != s.img_size)
        throw DimensionError("discriminator expects [N," + std::to_string(s.in_channels) + "," +
                             std::to_string(s.img_size) + "," + std::to_string(s.img_size) + "] images, got " +
                             shape_to_string(images.shape()));
    const Activation leaky = Activation::leaky_relu(s.leaky_alpha);
    const std::size_t n = images.dim(0);

    if (tape) {
        tape->block_inputs.clear();
        tape->pre_activations.clear();
        tape->activations.clear();
    }
    Tensor x = images;
    for (std::size_t i = 0; i < kBlocks; ++i) {
        Tensor pre = conv2d(x, p.at(block_name(i, "weight")), p.at(block_name(i, "bias")), 2, 1);
        Tensor act = activate(leaky, pre);
        if (tape) {
            tape->block_inputs.push_back(std::move(x));
            tape->pre_activations.push_back(std::move(pre));
            tape->activations.push_back(act);
        }
        x = std::move(act);
    }

    DiscriminatorOutput out;
    out.features = std::move(x).reshaped({n, s.feature_dim()});
    out.logits = dense(out.features, p.at("head.weight"), p.at("head.bias"));
    out.probabilities = activate(Activation::sigmoid(), out.logits);
    return out;
}

DiscriminatorGrads discriminator_backward(const Discriminator& d, const DiscriminatorTape& tape,
                                          const DiscriminatorOutput& forward, const Tensor& grad_logits,
                                          bool need_param_grads, bool need_input_grad) {
    const auto& p = d.params.tensors;
    if (tape.block_inputs.size() != kBlocks) throw ValidationError("discriminator_backward: tape was not recorded");
    if (grad_logits.shape() != forward.logits.shape())
        throw DimensionError("discriminator_backward: gradient shape " + shape_to_string(grad_logits.shape()) +
                             " does not match logits " + shape_to_string(forward.logits.shape()));
    const Activation leaky = Activation::leaky_relu(d.spec.leaky_alpha);

    DiscriminatorGrads out;
    if (need_param_grads) out.params = p.zeros_like();

    DenseGrads dg = dense_backward(grad_logits, forward.features, p.at("head.weight"), true);
    if (need_param_grads) {
        out.params.at("head.weight") = std::move(dg.weight);
        out.params.at("head.bias") = std::move(dg.bias);
    }
    Tensor grad = std::move(dg.input).reshaped(tape.activations.back().shape());
    for (std::size_t i = kBlocks; i-- > 0;) {
        grad = activate_backward(leaky, tape.pre_activations[i], tape.activations[i], grad);
        const bool want_input = i > 0 || need_input_grad;
        if (!want_input && !need_param_grads) break;
        Conv2dGrads cg =
            conv2d_backward(grad, tape.block_inputs[i], p.at(block_name(i, "weight")), 2, 1, want_input, need_param_grads);
        if (need_param_grads) {
            out.params.at(block_name(i, "weight")) = std::move(cg.kernel);
            out.params.at(block_name(i, "bias")) = std::move(cg.bias);
        }
        grad = std::move(cg.input);
    }
    if (need_input_grad) out.input = std::move(grad);
    return out;
}

}  // namespace dcgan
