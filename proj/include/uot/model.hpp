#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uot/tape.hpp"

namespace uot {

enum class Activation { Silu, Relu, Tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Toy architecture shared by generator and potential: inputs are lifted to
// `hidden` width, pass through `blocks` residual blocks (two affine+SiLU
// layers with an additive skip), then a two-layer output module. The
// generator additionally embeds the auxiliary variable z through two FC
// layers and sums the embeddings before the output module.
struct ArchSpec {
    int data_dim = 1;
    int z_dim = 1;
    int hidden = 128;
    int blocks = 3;
    Activation act = Activation::Silu;

    void validate() const;
    bool operator==(const ArchSpec&) const = default;
};

enum class NetKind { Generator, Potential };

struct LayerShape {
    int in = 0, out = 0;
    std::size_t w_off = 0, b_off = 0;  // into ModelParams::flat (row-major weights)
};

// Flat parameter storage plus the derived layer table. Layer order:
//   generator: z_fc1, z_fc2, x_embed, {block_a, block_b} x blocks, out_fc1, out_fc2
//   potential: y_embed, {block_a, block_b} x blocks, out_fc1, out_fc2
struct ModelParams {
    NetKind kind = NetKind::Generator;
    ArchSpec arch;
    std::vector<double> flat;
    std::vector<LayerShape> layers;
};

std::size_t param_count(NetKind kind, const ArchSpec& arch);

// Deterministic per seed: Kaiming-style scaled normal weights, zero biases.
ModelParams init_params(NetKind kind, const ArchSpec& arch, std::uint64_t seed);

// Plain double forward passes (no gradient recording).
void generator_forward(const ModelParams& p, std::span<const double> x,
                       std::span<const double> z, std::span<double> y_out);
double potential_forward(const ModelParams& p, std::span<const double> y);

// Taped forward passes. place_params appends one leaf per parameter (in
// flat order) and returns the first leaf's id, so after a backward pass
// adjoint(base + i) is the gradient w.r.t. flat[i].
NodeId place_params(Tape& t, const ModelParams& p);
std::vector<NodeId> taped_generator_forward(Tape& t, const ModelParams& p, NodeId base,
                                            std::span<const NodeId> x,
                                            std::span<const NodeId> z);
NodeId taped_potential_forward(Tape& t, const ModelParams& p, NodeId base,
                               std::span<const NodeId> y);

// Checkpoint round-trip (JSON with an arch header; values survive exactly).
std::string to_json(const ModelParams& p);
ModelParams params_from_json(const std::string& text);
void save_params(const ModelParams& p, const std::string& path);
ModelParams load_params(const std::string& path);

} // namespace uot
