// Timing comparison of the serial reference kernels against the OpenMP
// paths: batch gradient accumulation for both losses and the kNN KL
// estimator. Also reports per-iteration projections to guide profile
// choices for the toy experiments.

#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "uot/rng.hpp"
#include "uot/trainer.hpp"

using namespace uot;

namespace {

double now_sec() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <class F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_sec();
        f();
        best = std::min(best, now_sec() - t0);
    }
    return best;
}

Batch random_batch(std::size_t n, Rng& rng) {
    Batch b;
    b.n = n;
    b.dim = 1;
    b.data.resize(n);
    for (double& v : b.data) v = rng.normal();
    return b;
}

} // namespace

int main() {
    std::printf("threads available: %d\n\n", omp_get_max_threads());

    for (int hidden : {32, 48, 64}) {
        TrainConfig cfg;
        cfg.arch.hidden = hidden;
        cfg.arch.blocks = 3;
        cfg.lambda_r1 = 0.01;
        cfg.batch_size = 128;
        Rng rng(1);
        const ModelParams gen = init_params(NetKind::Generator, cfg.arch, 1);
        const ModelParams pot = init_params(NetKind::Potential, cfg.arch, 2);
        const Batch X = random_batch(128, rng);
        const Batch Y = random_batch(128, rng);
        const Batch Z = random_batch(128, rng);

        const double pot_ser = time_best_of(3, [&] {
            potential_grad(cfg, pot, gen, X, Y, Z, ExecPolicy::Serial);
        });
        const double pot_par = time_best_of(3, [&] {
            potential_grad(cfg, pot, gen, X, Y, Z, ExecPolicy::Parallel);
        });
        const double gen_ser = time_best_of(3, [&] {
            generator_grad(cfg, pot, gen, X, Z, ExecPolicy::Serial);
        });
        const double gen_par = time_best_of(3, [&] {
            generator_grad(cfg, pot, gen, X, Z, ExecPolicy::Parallel);
        });

        std::printf("hidden %3d | potential_grad  serial %7.1f ms  parallel %7.1f ms  "
                    "speedup %.2fx\n",
                    hidden, 1e3 * pot_ser, 1e3 * pot_par, pot_ser / pot_par);
        std::printf("hidden %3d | generator_grad  serial %7.1f ms  parallel %7.1f ms  "
                    "speedup %.2fx\n",
                    hidden, 1e3 * gen_ser, 1e3 * gen_par, gen_ser / gen_par);
        const double iter = 5.0 * pot_par + gen_par;
        std::printf("hidden %3d | one training iteration (5 pot + 1 gen): %.2f s, "
                    "epoch at 31 iters: %.1f s\n\n",
                    hidden, iter, 31.0 * iter);
    }

    {
        Rng rng(2);
        const std::size_t n = 4000;
        std::vector<double> p(n), q(n);
        for (double& v : p) v = rng.normal();
        for (double& v : q) v = 1.0 + rng.normal();
        const double ser = time_best_of(3, [&] {
            knn_kl_estimate(p, n, q, n, 1, 2, ExecPolicy::Serial);
        });
        const double par = time_best_of(3, [&] {
            knn_kl_estimate(p, n, q, n, 1, 2, ExecPolicy::Parallel);
        });
        std::printf("knn_kl n=4000   | serial %7.1f ms  parallel %7.1f ms  speedup %.2fx\n",
                    1e3 * ser, 1e3 * par, ser / par);
    }
    return 0;
}
