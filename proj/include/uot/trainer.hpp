#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uot/entropy.hpp"
#include "uot/model.hpp"
#include "uot/parallel.hpp"
#include "uot/toydata.hpp"

namespace uot {

// Alternating semi-dual training: `disc_steps` potential updates per
// generator update, quadratic cost tau*|x-y|^2, entropy conjugates psi1
// (source side) and psi2 (target side), and an input-gradient penalty of
// weight lambda_r1 on real samples.
struct TrainConfig {
    double tau = 0.1;
    Entropy psi1 = Entropy::KL;
    Entropy psi2 = Entropy::KL;
    double lambda_r1 = 0.01;
    int batch_size = 256;
    int epochs = 2000;
    int disc_steps = 5;
    double lr_potential = 1e-4;
    double lr_generator = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    std::uint64_t seed = 0;
    int eval_interval = 100;  // epochs between metric records
    ArchSpec arch;
    double divergence_threshold = 1e6;
    ExecPolicy exec = ExecPolicy::Parallel;

    void validate() const;
};

// Variants of the same loop: Otm pins both conjugates to identity (the
// hard-constraint special case), FixedMu pins only the source side.
enum class Variant { Uotm, Otm, FixedMu };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
TrainConfig make_variant(Variant v, TrainConfig base);

double cost_value(std::span<const double> x, std::span<const double> y, double tau);

// Mini-batch as a flat row-major buffer.
struct Batch {
    std::vector<double> data;
    std::size_t n = 0;
    int dim = 1;

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * dim, static_cast<std::size_t>(dim)};
    }
};

// Whole-batch loss built on one tape; reference path used by tests and
// small runs. Returns the loss node and the span of parameter leaves so
// the caller can backward() and harvest gradients.
struct LossGraph {
    Expr loss;
    NodeId param_base = 0;
    std::size_t param_count = 0;
};

// L_v = mean_x psi1*(-c(x,T(x,z)) + v(T(x,z))) + mean_y [psi2*(-v(y))
//       + lambda * |grad_y v(y)|^2]. Generator outputs enter as detached
// constants; only potential parameters are placed as leaves.
LossGraph potential_loss(Tape& tape, const TrainConfig& cfg, const ModelParams& potential,
                         const ModelParams& generator, const Batch& X, const Batch& Y,
                         const Batch& Z);

// L_T = mean_x [c(x,T(x,z)) - v(T(x,z))]; generator parameters are the
// leaves, potential parameters enter frozen.
LossGraph generator_loss(Tape& tape, const TrainConfig& cfg, const ModelParams& potential,
                         const ModelParams& generator, const Batch& X, const Batch& Z);

// Chunked batch-gradient kernels: same math as the LossGraph routes but
// with one small tape per sample, a fixed chunk partition and a fixed
// reduction order. Serial and Parallel execution are bitwise identical.
struct BatchGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

BatchGrad potential_grad(const TrainConfig& cfg, const ModelParams& potential,
                         const ModelParams& generator, const Batch& X, const Batch& Y,
                         const Batch& Z, ExecPolicy exec);
BatchGrad generator_grad(const TrainConfig& cfg, const ModelParams& potential,
                         const ModelParams& generator, const Batch& X, const Batch& Z,
                         ExecPolicy exec);

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

// Standard Adam with bias correction; eps = 1e-8.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double lr, double beta1, double beta2, double eps = 1e-8);

struct EvalRecord {
    int epoch = 0;
    double loss_v = 0.0;
    double loss_t = 0.0;
    double kl = 0.0;            // kNN estimate of KL(generated || target)
    double monotonicity = 0.0;  // 1D transport-map ordering score
    double outlier_mass = 0.0;  // generated mass below 0
    double wall_sec = 0.0;
};

std::string to_jsonl(const EvalRecord& r);

struct RunReport {
    std::vector<EvalRecord> records;
    bool diverged = false;
    std::string note;
};

struct TrainResult {
    ModelParams generator;
    ModelParams potential;
    RunReport report;
};

// Full training loop over fixed pre-sampled datasets. Fully reproducible
// for a given config. Divergence (NaN or |L_v| above the threshold) stops
// the run and flags the report. on_eval, when set, sees each record as it
// is produced.
TrainResult train(const TrainConfig& cfg, const SampleSet& source, const SampleSet& target,
                  const std::function<void(const EvalRecord&)>& on_eval = {});

// Pushforward of the source set through the generator with fresh z draws;
// used for evaluation and sample dumps.
SampleSet generate_samples(const ModelParams& generator, const SampleSet& source,
                           std::uint64_t z_seed);

} // namespace uot
