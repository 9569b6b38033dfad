#include "uot/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <omp.h>

#include "uot/rng.hpp"

namespace uot {

void TrainConfig::validate() const {
    arch.validate();
    if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
    if (disc_steps < 1) throw std::invalid_argument("config: disc_steps must be >= 1");
    if (lr_potential <= 0.0 || lr_generator <= 0.0)
        throw std::invalid_argument("config: learning rates must be positive");
    if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (tau <= 0.0) throw std::invalid_argument("config: tau must be positive");
    if (lambda_r1 < 0.0) throw std::invalid_argument("config: lambda_r1 must be >= 0");
}

const char* variant_name(Variant v) {
    switch (v) {
    case Variant::Uotm:    return "uotm";
    case Variant::Otm:     return "otm";
    case Variant::FixedMu: return "fixed_mu";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "uotm") return Variant::Uotm;
    if (name == "otm") return Variant::Otm;
    if (name == "fixed_mu") return Variant::FixedMu;
    throw std::invalid_argument("unknown variant: " + name);
}

TrainConfig make_variant(Variant v, TrainConfig base) {
    switch (v) {
    case Variant::Uotm:
        break;
    case Variant::Otm:
        base.psi1 = Entropy::Identity;
        base.psi2 = Entropy::Identity;
        break;
    case Variant::FixedMu:
        base.psi1 = Entropy::Identity;
        break;
    }
    return base;
}

double cost_value(std::span<const double> x, std::span<const double> y, double tau) {
    if (x.size() != y.size()) throw std::invalid_argument("cost: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return tau * acc;
}

namespace {

// tau * sum (x_i - y_i)^2 with x fixed and y on the tape
Expr cost_expr(Tape& t, std::span<const double> x, std::span<const NodeId> y, double tau) {
    std::vector<NodeId> sq(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        sq[i] = t.pow2(t.sub(y[i], t.constant(x[i])));
    const NodeId s = sq.size() == 1 ? sq[0] : t.sum(sq);
    return wrap(t, t.mul(t.constant(tau), s));
}

std::vector<NodeId> make_leaves(Tape& t, std::span<const double> vals) {
    std::vector<NodeId> ids(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) ids[i] = t.leaf(vals[i]);
    return ids;
}

// One fake-sample term: psi1*(-c(x, T(x,z)) + v(y_hat)) with y_hat the
// detached generator output.
Expr fake_term(Tape& t, const TrainConfig& cfg, const ModelParams& potential,
               NodeId phi_base, std::span<const double> x, std::span<const double> y_hat) {
    const double c = cost_value(x, y_hat, cfg.tau);
    const auto y_ids = make_leaves(t, y_hat);
    const NodeId v = taped_potential_forward(t, potential, phi_base, y_ids);
    const Expr arg = wrap(t, t.add(t.constant(-c), v));
    return psi_star_expr(cfg.psi1, arg);
}

// One real-sample term: psi2*(-v(y)) + lambda * |grad_y v(y)|^2.
Expr real_term(Tape& t, const TrainConfig& cfg, const ModelParams& potential,
               NodeId phi_base, std::span<const double> y) {
    const auto y_ids = make_leaves(t, y);
    const NodeId v = taped_potential_forward(t, potential, phi_base, y_ids);
    Expr term = psi_star_expr(cfg.psi2, wrap(t, t.neg(v)));
    if (cfg.lambda_r1 > 0.0) {
        const NodeId gns = t.grad_norm_sq(v, y_ids);
        term = term + wrap(t, t.mul(t.constant(cfg.lambda_r1), gns));
    }
    return term;
}

// One generator-sample term: c(x, T(x,z)) - v(T(x,z)) with theta leaves.
Expr gen_term(Tape& t, const TrainConfig& cfg, const ModelParams& potential,
              const ModelParams& generator, NodeId theta_base, NodeId phi_base,
              std::span<const double> x, std::span<const double> z) {
    const auto x_ids = make_leaves(t, x);
    const auto z_ids = make_leaves(t, z);
    const auto y = taped_generator_forward(t, generator, theta_base, x_ids, z_ids);
    const Expr c = cost_expr(t, x, y, cfg.tau);
    const NodeId v = taped_potential_forward(t, potential, phi_base, y);
    return c - wrap(t, v);
}

} // namespace

LossGraph potential_loss(Tape& tape, const TrainConfig& cfg, const ModelParams& potential,
                         const ModelParams& generator, const Batch& X, const Batch& Y,
                         const Batch& Z) {
    if (X.n == 0 || Y.n == 0) throw std::invalid_argument("potential_loss: empty batch");
    if (Z.n != X.n) throw std::invalid_argument("potential_loss: X and Z sizes differ");

    const NodeId phi_base = place_params(tape, potential);
    std::vector<double> y_hat(generator.arch.data_dim);

    std::vector<NodeId> fakes(X.n), reals(Y.n);
    for (std::size_t i = 0; i < X.n; ++i) {
        generator_forward(generator, X.row(i), Z.row(i), y_hat);
        fakes[i] = fake_term(tape, cfg, potential, phi_base, X.row(i), y_hat).id;
    }
    for (std::size_t i = 0; i < Y.n; ++i)
        reals[i] = real_term(tape, cfg, potential, phi_base, Y.row(i)).id;

    const Expr loss =
        wrap(tape, tape.sum(fakes)) * (1.0 / static_cast<double>(X.n)) +
        wrap(tape, tape.sum(reals)) * (1.0 / static_cast<double>(Y.n));
    return {loss, phi_base, potential.flat.size()};
}

LossGraph generator_loss(Tape& tape, const TrainConfig& cfg, const ModelParams& potential,
                         const ModelParams& generator, const Batch& X, const Batch& Z) {
    if (X.n == 0) throw std::invalid_argument("generator_loss: empty batch");
    if (Z.n != X.n) throw std::invalid_argument("generator_loss: X and Z sizes differ");

    const NodeId theta_base = place_params(tape, generator);
    const NodeId phi_base = place_params(tape, potential);

    std::vector<NodeId> terms(X.n);
    for (std::size_t i = 0; i < X.n; ++i)
        terms[i] = gen_term(tape, cfg, potential, generator, theta_base, phi_base,
                            X.row(i), Z.row(i)).id;
    const Expr loss = wrap(tape, tape.sum(terms)) * (1.0 / static_cast<double>(X.n));
    return {loss, theta_base, generator.flat.size()};
}

namespace {

struct ChunkAccumulator {
    std::vector<std::vector<double>> grads;  // one per chunk
    std::vector<double> losses;

    void prepare(std::size_t param_count) {
        grads.resize(kReductionChunks);
        losses.assign(kReductionChunks, 0.0);
        for (auto& g : grads) g.assign(param_count, 0.0);
    }

    BatchGrad reduce() const {
        BatchGrad out;
        out.grad.assign(grads[0].size(), 0.0);
        for (std::size_t c = 0; c < kReductionChunks; ++c) {
            out.loss += losses[c];
            const auto& g = grads[c];
            for (std::size_t k = 0; k < g.size(); ++k) out.grad[k] += g[k];
        }
        return out;
    }
};

Tape& thread_tape() {
    static thread_local Tape tape;
    return tape;
}

} // namespace

BatchGrad potential_grad(const TrainConfig& cfg, const ModelParams& potential,
                         const ModelParams& generator, const Batch& X, const Batch& Y,
                         const Batch& Z, ExecPolicy exec) {
    if (X.n == 0 || Y.n == 0) throw std::invalid_argument("potential_grad: empty batch");
    if (Z.n != X.n) throw std::invalid_argument("potential_grad: X and Z sizes differ");

    const std::size_t P = potential.flat.size();
    const double wx = 1.0 / static_cast<double>(X.n);
    const double wy = 1.0 / static_cast<double>(Y.n);

    ChunkAccumulator acc;
    acc.prepare(P);
    const bool par = exec == ExecPolicy::Parallel;

#pragma omp parallel if (par)
    {
        Tape& t = thread_tape();
        t.reset();
        const NodeId phi_base = place_params(t, potential);
        const std::size_t mark = t.size();
        std::vector<double> y_hat(generator.arch.data_dim);

#pragma omp for schedule(dynamic, 1)
        for (long long cc = 0; cc < static_cast<long long>(kReductionChunks); ++cc) {
            const auto c = static_cast<std::size_t>(cc);
            auto& grad = acc.grads[c];
            double loss = 0.0;
            for (std::size_t i = chunk_begin(X.n, c); i < chunk_end(X.n, c); ++i) {
                t.rewind(mark);
                generator_forward(generator, X.row(i), Z.row(i), y_hat);
                const Expr term = fake_term(t, cfg, potential, phi_base, X.row(i), y_hat);
                loss += wx * term.value();
                t.backward(term.id);
                for (std::size_t k = 0; k < P; ++k)
                    grad[k] += wx * t.adjoint(phi_base + k);
            }
            for (std::size_t i = chunk_begin(Y.n, c); i < chunk_end(Y.n, c); ++i) {
                t.rewind(mark);
                const Expr term = real_term(t, cfg, potential, phi_base, Y.row(i));
                loss += wy * term.value();
                t.backward(term.id);
                for (std::size_t k = 0; k < P; ++k)
                    grad[k] += wy * t.adjoint(phi_base + k);
            }
            acc.losses[c] = loss;
        }
    }
    return acc.reduce();
}

BatchGrad generator_grad(const TrainConfig& cfg, const ModelParams& potential,
                         const ModelParams& generator, const Batch& X, const Batch& Z,
                         ExecPolicy exec) {
    if (X.n == 0) throw std::invalid_argument("generator_grad: empty batch");
    if (Z.n != X.n) throw std::invalid_argument("generator_grad: X and Z sizes differ");

    const std::size_t P = generator.flat.size();
    const double wx = 1.0 / static_cast<double>(X.n);

    ChunkAccumulator acc;
    acc.prepare(P);
    const bool par = exec == ExecPolicy::Parallel;

#pragma omp parallel if (par)
    {
        Tape& t = thread_tape();
        t.reset();
        const NodeId theta_base = place_params(t, generator);
        const NodeId phi_base = place_params(t, potential);
        const std::size_t mark = t.size();

#pragma omp for schedule(dynamic, 1)
        for (long long cc = 0; cc < static_cast<long long>(kReductionChunks); ++cc) {
            const auto c = static_cast<std::size_t>(cc);
            auto& grad = acc.grads[c];
            double loss = 0.0;
            for (std::size_t i = chunk_begin(X.n, c); i < chunk_end(X.n, c); ++i) {
                t.rewind(mark);
                const Expr term = gen_term(t, cfg, potential, generator, theta_base, phi_base,
                                           X.row(i), Z.row(i));
                loss += wx * term.value();
                t.backward(term.id);
                for (std::size_t k = 0; k < P; ++k)
                    grad[k] += wx * t.adjoint(theta_base + k);
            }
            acc.losses[c] = loss;
        }
    }
    return acc.reduce();
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grad.size())
        throw std::invalid_argument("adam_step: param/grad size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state size mismatch");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

std::string to_jsonl(const EvalRecord& r) {
    std::ostringstream os;
    os.precision(17);
    auto num = [&os](double v) {
        if (std::isfinite(v))
            os << v;
        else
            os << "null";  // keep the stream valid JSON on diverged runs
    };
    os << "{\"epoch\":" << r.epoch << ",\"loss_v\":";
    num(r.loss_v);
    os << ",\"loss_t\":";
    num(r.loss_t);
    os << ",\"kl\":";
    num(r.kl);
    os << ",\"monotonicity\":";
    num(r.monotonicity);
    os << ",\"outlier_mass\":";
    num(r.outlier_mass);
    os << ",\"wall_sec\":";
    num(r.wall_sec);
    os << "}";
    return os.str();
}

SampleSet generate_samples(const ModelParams& generator, const SampleSet& source,
                           std::uint64_t z_seed) {
    Rng zrng(Rng::substream(z_seed, 0x7a67656eULL));
    SampleSet out;
    out.n = source.n;
    out.dim = source.dim;
    out.provenance = source.provenance;
    out.points.resize(source.points.size());
    std::vector<double> z(generator.arch.z_dim);
    for (std::size_t i = 0; i < source.n; ++i) {
        for (double& v : z) v = zrng.normal();
        generator_forward(generator, source.row(i), z,
                          {out.points.data() + i * out.dim, static_cast<std::size_t>(out.dim)});
    }
    return out;
}

namespace {

// shuffled-index batch cursor; reshuffles when a full batch no longer fits
class BatchCursor {
public:
    BatchCursor(std::size_t n, std::uint64_t seed) : idx_(n), rng_(seed), pos_(0) {
        std::iota(idx_.begin(), idx_.end(), 0);
        shuffle();
    }

    void fill(const SampleSet& set, Batch& b, std::size_t batch) {
        b.n = batch;
        b.dim = set.dim;
        b.data.resize(batch * set.dim);
        for (std::size_t i = 0; i < batch; ++i) {
            if (pos_ >= idx_.size()) shuffle();
            const std::size_t r = idx_[pos_++];
            std::copy_n(set.points.data() + r * set.dim, set.dim,
                        b.data.data() + i * set.dim);
        }
    }

private:
    void shuffle() {
        for (std::size_t i = idx_.size(); i > 1; --i)
            std::swap(idx_[i - 1], idx_[rng_.index(i)]);
        pos_ = 0;
    }

    std::vector<std::size_t> idx_;
    Rng rng_;
    std::size_t pos_;
};

} // namespace

TrainResult train(const TrainConfig& cfg, const SampleSet& source, const SampleSet& target,
                  const std::function<void(const EvalRecord&)>& on_eval) {
    cfg.validate();
    if (source.dim != cfg.arch.data_dim || target.dim != cfg.arch.data_dim)
        throw std::invalid_argument("train: dataset dimension does not match arch");
    if (source.n < static_cast<std::size_t>(cfg.batch_size) ||
        target.n < static_cast<std::size_t>(cfg.batch_size))
        throw std::invalid_argument("train: dataset smaller than one batch");

    TrainResult res;
    res.generator = init_params(NetKind::Generator, cfg.arch, cfg.seed);
    res.potential = init_params(NetKind::Potential, cfg.arch, cfg.seed);
    if (cfg.epochs == 0) return res;

    AdamState opt_phi, opt_theta;
    BatchCursor src_cursor(source.n, Rng::substream(cfg.seed, 0x737263ULL));
    BatchCursor tgt_cursor(target.n, Rng::substream(cfg.seed, 0x746774ULL));
    Rng z_rng(Rng::substream(cfg.seed, 0x7aULL));
    const std::uint64_t eval_seed = Rng::substream(cfg.seed, 0xe7a1ULL);

    Batch X, Y, Z;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t iters_per_epoch = std::max<std::size_t>(1, source.n / batch);
    const auto t0 = std::chrono::steady_clock::now();

    double last_loss_v = 0.0, last_loss_t = 0.0;

    auto fill_z = [&](std::size_t n) {
        Z.n = n;
        Z.dim = cfg.arch.z_dim;
        Z.data.resize(n * Z.dim);
        for (double& v : Z.data) v = z_rng.normal();
    };

    auto diverged = [&](double loss_v) {
        return !std::isfinite(loss_v) || std::abs(loss_v) > cfg.divergence_threshold;
    };

    auto evaluate = [&](int epoch) {
        const SampleSet gen = generate_samples(res.generator, source, eval_seed + epoch);
        EvalRecord rec;
        rec.epoch = epoch;
        rec.loss_v = last_loss_v;
        rec.loss_t = last_loss_t;
        const bool finite = std::all_of(gen.points.begin(), gen.points.end(),
                                        [](double v) { return std::isfinite(v); });
        if (finite) {
            rec.kl = knn_kl_estimate(gen.points, gen.n, target.points, target.n, gen.dim, 2,
                                     cfg.exec);
            if (gen.dim == 1) {
                // map quality on the z = 0 slice: with stochastic z the
                // ordering of near-equal x values is pure noise
                std::vector<std::pair<double, double>> pairs(gen.n);
                const std::vector<double> z0(cfg.arch.z_dim, 0.0);
                double ty = 0.0;
                for (std::size_t i = 0; i < gen.n; ++i) {
                    generator_forward(res.generator, source.row(i), z0, {&ty, 1});
                    pairs[i] = {source.points[i], ty};
                }
                rec.monotonicity = monotonicity_score(pairs);
                rec.outlier_mass = mode_mass(gen.points, 0.0, Side::Below);
            }
        } else {
            rec.kl = rec.monotonicity = rec.outlier_mass =
                std::numeric_limits<double>::quiet_NaN();
        }
        rec.wall_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.report.records.push_back(rec);
        if (on_eval) on_eval(rec);
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t it = 0; it < iters_per_epoch; ++it) {
            for (int d = 0; d < cfg.disc_steps; ++d) {
                src_cursor.fill(source, X, batch);
                tgt_cursor.fill(target, Y, batch);
                fill_z(batch);
                const BatchGrad g =
                    potential_grad(cfg, res.potential, res.generator, X, Y, Z, cfg.exec);
                last_loss_v = g.loss;
                if (diverged(g.loss)) {
                    res.report.diverged = true;
                    res.report.note = "potential loss diverged at epoch " +
                                      std::to_string(epoch) + " (value " +
                                      std::to_string(g.loss) + ")";
                    evaluate(epoch);
                    return res;
                }
                adam_step(opt_phi, res.potential.flat, g.grad, cfg.lr_potential, cfg.beta1,
                          cfg.beta2);
            }
            src_cursor.fill(source, X, batch);
            fill_z(batch);
            const BatchGrad g =
                generator_grad(cfg, res.potential, res.generator, X, Z, cfg.exec);
            last_loss_t = g.loss;
            if (!std::isfinite(g.loss)) {
                res.report.diverged = true;
                res.report.note = "generator loss became non-finite at epoch " +
                                  std::to_string(epoch);
                evaluate(epoch);
                return res;
            }
            adam_step(opt_theta, res.generator.flat, g.grad, cfg.lr_generator, cfg.beta1,
                      cfg.beta2);
        }
        if (epoch % cfg.eval_interval == 0 || epoch == cfg.epochs) evaluate(epoch);
    }
    return res;
}

} // namespace uot
