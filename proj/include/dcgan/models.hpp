#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dcgan/parameters.hpp"
#include "dcgan/tensor.hpp"

namespace dcgan {

/// Generator topology: dense projection of z onto an (s/16)^2 map with
/// 8*base channels, then four [upsample 2x -> conv 3x3 -> leaky_relu] blocks
/// halving the width each time, then conv 3x3 to out_channels and tanh.
struct GeneratorSpec {
    std::size_t z_dim = 100;
    std::size_t base_channels = 64;
    std::size_t img_size = 128;
    std::size_t out_channels = 1;
    double leaky_alpha = 0.2;

    /// Throws SpecError on an unusable combination.
    void validate() const;
    std::size_t initial_extent() const { return img_size / 16; }
    std::size_t initial_channels() const { return base_channels * 8; }
    std::string describe() const;
};

/// Discriminator topology: four [conv 4x4 stride 2 pad 1 -> leaky_relu]
/// blocks doubling from base channels, flatten, dense to one logit, sigmoid.
struct DiscriminatorSpec {
    std::size_t base_channels = 64;
    std::size_t img_size = 128;
    std::size_t in_channels = 1;
    double leaky_alpha = 0.2;

    void validate() const;
    /// Width of the flattened penultimate layer: 8*base*(s/16)^2.
    std::size_t feature_dim() const;
    std::string describe() const;
};

/// Parameters of one network plus a fingerprint of the topology that produced them.
///
/// Generator order: proj.weight [z, C0*m*m], proj.bias, block{1..4}.conv.weight,
/// block{1..4}.conv.bias, out.conv.weight, out.conv.bias.
/// Discriminator order: block{1..4}.conv.weight / .bias, head.weight [F, 1], head.bias.
struct NetworkParams {
    ParameterSet tensors;
    std::string topology;
    std::uint64_t fingerprint = 0;
};

std::uint64_t fingerprint_of(const std::string& text);

struct Generator {
    GeneratorSpec spec;
    NetworkParams params;
};

struct Discriminator {
    DiscriminatorSpec spec;
    NetworkParams params;
};

/// Conv and dense weights ~ Normal(0, 0.02^2), biases exactly 0. Each tensor
/// draws from its own stream derived from (seed, position).
void init_weights(ParameterSet& params, std::uint64_t seed);

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed);
Discriminator build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

/// Closed-form parameter counts, layer by layer.
std::size_t generator_parameter_count(const GeneratorSpec& spec);
std::size_t discriminator_parameter_count(const DiscriminatorSpec& spec);

/// Rebuilds the network around existing tensors, checking names and shapes.
Generator make_generator(const GeneratorSpec& spec, ParameterSet tensors);
Discriminator make_discriminator(const DiscriminatorSpec& spec, ParameterSet tensors);

// Intermediate values kept by a forward pass for the matching backward pass.
struct GeneratorTape {
    Tensor z;
    struct Block {
        Tensor upsampled;
        Tensor pre_activation;
        Tensor activation;
    };
    std::vector<Block> blocks;
    Tensor out_pre_activation;
    Tensor output;
};

struct DiscriminatorTape {
    std::vector<Tensor> block_inputs;
    std::vector<Tensor> pre_activations;
    std::vector<Tensor> activations;
};

/// z [N, z_dim] -> images [N, out_channels, s, s] in [-1, 1].
Tensor generator_forward(const Generator& g, const Tensor& z, GeneratorTape* tape = nullptr);

/// Gradients of a scalar loss w.r.t. generator parameters, given d loss / d output.
ParameterSet generator_backward(const Generator& g, const GeneratorTape& tape, const Tensor& grad_output);

struct DiscriminatorOutput {
    Tensor logits;         // [N, 1]
    Tensor probabilities;  // [N, 1], sigmoid(logits)
    Tensor features;       // [N, feature_dim], penultimate activations
};

DiscriminatorOutput discriminator_forward(const Discriminator& d, const Tensor& images,
                                          DiscriminatorTape* tape = nullptr);

struct DiscriminatorGrads {
    ParameterSet params;  // empty when not requested
    Tensor input;         // empty when not requested
};

/// Backward from d loss / d logits.
DiscriminatorGrads discriminator_backward(const Discriminator& d, const DiscriminatorTape& tape,
                                          const DiscriminatorOutput& forward, const Tensor& grad_logits,
                                          bool need_param_grads, bool need_input_grad);

}  // namespace dcgan
