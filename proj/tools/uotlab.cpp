// Experiment runner for the toy unbalanced-optimal-transport lab:
// deterministic training runs, hyperparameter sweeps, discrete-solver
// bound checks and plot-ready artifact dumps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uot/rng.hpp"
#include "uot/trainer.hpp"
#include "uot/uot_solver.hpp"

namespace fs = std::filesystem;
using namespace uot;

namespace {

enum class Experiment { Matching, Outlier, BoundCheck, AblationLambda, AblationTau, AblationPsi };

const char* experiment_name(Experiment e) {
    switch (e) {
    case Experiment::Matching:       return "matching";
    case Experiment::Outlier:        return "outlier";
    case Experiment::BoundCheck:     return "bound_check";
    case Experiment::AblationLambda: return "ablation_lambda";
    case Experiment::AblationTau:    return "ablation_tau";
    case Experiment::AblationPsi:    return "ablation_psi";
    }
    return "?";
}

Experiment experiment_from_name(const std::string& name) {
    if (name == "matching") return Experiment::Matching;
    if (name == "outlier") return Experiment::Outlier;
    if (name == "bound_check") return Experiment::BoundCheck;
    if (name == "ablation_lambda") return Experiment::AblationLambda;
    if (name == "ablation_tau") return Experiment::AblationTau;
    if (name == "ablation_psi") return Experiment::AblationPsi;
    throw CLI::ValidationError("experiment", "unknown experiment: " + name);
}

struct ExperimentConfig {
    Experiment experiment = Experiment::Matching;
    Variant variant = Variant::Uotm;
    TrainConfig train;
    std::size_t dataset_n = 4000;
    std::string out_dir = "out/run";
    long bound_instances = 100;
    double bound_tol = 1e-7;
};

std::string config_echo(const ExperimentConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "experiment=" << experiment_name(c.experiment) << '\n'
       << "variant=" << variant_name(c.variant) << '\n'
       << "tau=" << c.train.tau << '\n'
       << "psi1=" << entropy_name(c.train.psi1) << '\n'
       << "psi2=" << entropy_name(c.train.psi2) << '\n'
       << "lambda_r1=" << c.train.lambda_r1 << '\n'
       << "batch_size=" << c.train.batch_size << '\n'
       << "epochs=" << c.train.epochs << '\n'
       << "disc_steps=" << c.train.disc_steps << '\n'
       << "lr_potential=" << c.train.lr_potential << '\n'
       << "lr_generator=" << c.train.lr_generator << '\n'
       << "beta1=" << c.train.beta1 << '\n'
       << "beta2=" << c.train.beta2 << '\n'
       << "seed=" << c.train.seed << '\n'
       << "eval_interval=" << c.train.eval_interval << '\n'
       << "hidden=" << c.train.arch.hidden << '\n'
       << "blocks=" << c.train.arch.blocks << '\n'
       << "z_dim=" << c.train.arch.z_dim << '\n'
       << "data_dim=" << c.train.arch.data_dim << '\n'
       << "activation=" << activation_name(c.train.arch.act) << '\n'
       << "dataset_n=" << c.dataset_n << '\n'
       << "bound_instances=" << c.bound_instances << '\n'
       << "bound_tol=" << c.bound_tol << '\n'
       << "out_dir=" << c.out_dir << '\n';
    return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

// density histogram over [-4, 4] with 80 bins for 1D sample sets
void write_histogram_csv(const fs::path& path, const SampleSet& target,
                         const SampleSet& generated) {
    const int bins = 80;
    const double lo = -4.0, hi = 4.0;
    const double width = (hi - lo) / bins;
    std::vector<double> tcount(bins, 0.0), gcount(bins, 0.0);
    auto fill = [&](const SampleSet& s, std::vector<double>& count) {
        for (std::size_t i = 0; i < s.n; ++i) {
            const double v = s.points[i * s.dim];
            if (v < lo || v >= hi) continue;
            count[static_cast<std::size_t>((v - lo) / width)] += 1.0;
        }
        for (double& c : count) c /= static_cast<double>(s.n) * width;
    };
    fill(target, tcount);
    fill(generated, gcount);
    std::ostringstream os;
    os.precision(17);
    os << "bin_center,target_density,generated_density\n";
    for (int b = 0; b < bins; ++b)
        os << lo + width * (b + 0.5) << ',' << tcount[b] << ',' << gcount[b] << '\n';
    write_file(path, os.str());
}

struct RunOutcome {
    bool diverged = false;
    EvalRecord final;
    std::string note;
};

// one full training run with all artifacts in cfg.out_dir
RunOutcome run_training(const ExperimentConfig& cfg, bool quiet = false) {
    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "config.echo", config_echo(cfg));

    ToySpec src_spec, tgt_spec;
    src_spec.n = tgt_spec.n = cfg.dataset_n;
    src_spec.seed = Rng::substream(cfg.train.seed, 1);
    tgt_spec.seed = Rng::substream(cfg.train.seed, 2);
    src_spec.dim = tgt_spec.dim = 1;
    if (cfg.experiment == Experiment::Outlier) {
        src_spec.dataset = ToyDataset::StdNormal;
        tgt_spec.dataset = ToyDataset::Outlier1D;
    } else {
        src_spec.dataset = ToyDataset::MatchSource1D;
        tgt_spec.dataset = ToyDataset::MatchTarget1D;
    }
    const SampleSet source = sample_toy(src_spec);
    const SampleSet target = sample_toy(tgt_spec);

    std::ofstream jsonl(fs::path(cfg.out_dir) / "report.jsonl");
    std::ofstream metrics(fs::path(cfg.out_dir) / "metrics.csv");
    metrics.precision(17);
    metrics << "epoch,loss_v,loss_t,kl,monotonicity,outlier_mass\n";

    const TrainConfig train_cfg = make_variant(cfg.variant, cfg.train);
    const TrainResult result =
        train(train_cfg, source, target, [&](const EvalRecord& r) {
            jsonl << to_jsonl(r) << '\n';
            metrics << r.epoch << ',' << r.loss_v << ',' << r.loss_t << ',' << r.kl << ','
                    << r.monotonicity << ',' << r.outlier_mass << '\n';
            if (!quiet)
                std::cout << "epoch " << r.epoch << "  L_v " << r.loss_v << "  L_T "
                          << r.loss_t << "  kl " << r.kl << "  mono " << r.monotonicity
                          << std::endl;
        });

    save_params(result.generator, (fs::path(cfg.out_dir) / "checkpoint_generator.json").string());
    save_params(result.potential, (fs::path(cfg.out_dir) / "checkpoint_potential.json").string());

    // transport-map dump (x, z, T(x,z)) plus density histogram
    {
        Rng zrng(Rng::substream(cfg.train.seed, 0x73616d70ULL));
        std::ostringstream os;
        os.precision(17);
        os << "x,z,Tx\n";
        SampleSet gen;
        gen.n = source.n;
        gen.dim = 1;
        gen.points.resize(source.n);
        std::vector<double> z(train_cfg.arch.z_dim);
        for (std::size_t i = 0; i < source.n; ++i) {
            for (double& v : z) v = zrng.normal();
            double y = 0.0;
            generator_forward(result.generator, source.row(i), z, {&y, 1});
            gen.points[i] = y;
            os << source.points[i] << ',' << z[0] << ',' << y << '\n';
        }
        write_file(fs::path(cfg.out_dir) / "samples.csv", os.str());
        write_histogram_csv(fs::path(cfg.out_dir) / "histogram.csv", target, gen);
    }

    RunOutcome out;
    out.diverged = result.report.diverged;
    out.note = result.report.note;
    if (!result.report.records.empty()) out.final = result.report.records.back();

    nlohmann::json summary;
    summary["experiment"] = experiment_name(cfg.experiment);
    summary["variant"] = variant_name(cfg.variant);
    summary["tau"] = cfg.train.tau;
    summary["psi1"] = entropy_name(train_cfg.psi1);
    summary["psi2"] = entropy_name(train_cfg.psi2);
    summary["lambda_r1"] = cfg.train.lambda_r1;
    summary["seed"] = cfg.train.seed;
    summary["diverged"] = out.diverged;
    summary["note"] = out.note;
    // wall time stays out of summary.json so reruns of the echoed config
    // regenerate it byte-for-byte (timings live in report.jsonl)
    summary["final"] = {{"epoch", out.final.epoch},
                        {"loss_v", out.final.loss_v},
                        {"loss_t", out.final.loss_t},
                        {"kl", out.final.kl},
                        {"monotonicity", out.final.monotonicity},
                        {"outlier_mass", out.final.outlier_mass}};
    write_file(fs::path(cfg.out_dir) / "summary.json", summary.dump(2) + "\n");
    return out;
}

int run_bound_check(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "config.echo", config_echo(cfg));
    Rng rng(Rng::substream(cfg.train.seed, 0xb0cdULL));

    std::ostringstream os;
    os.precision(12);
    os << "instance,n_mu,n_nu,tau,psi1,psi2,lhs,rhs,slack,holds\n";
    std::ofstream inst_log(fs::path(cfg.out_dir) / "instances.jsonl");
    long held = 0;

    for (long k = 0; k < cfg.bound_instances; ++k) {
        const std::size_t n = 2 + rng.index(7);  // 2..8 atoms
        const std::size_t m = 2 + rng.index(7);
        auto draw = [&](std::size_t sz) {
            DiscreteMeasure d;
            double total = 0.0;
            for (std::size_t i = 0; i < sz; ++i) {
                d.atoms.push_back(-2.0 + 4.0 * rng.uniform());
                d.weights.push_back(0.05 + rng.uniform());
                total += d.weights.back();
            }
            for (double& w : d.weights) w /= total;
            return d;
        };
        UotInstance inst;
        inst.mu = draw(n);
        inst.nu = draw(m);
        inst.tau = std::pow(10.0, -2.0 + 2.0 * rng.uniform());  // [0.01, 1]
        inst.psi1 = rng.uniform() < 0.5 ? Entropy::KL : Entropy::Chi2;
        inst.psi2 = rng.uniform() < 0.5 ? Entropy::KL : Entropy::Chi2;

        const BoundReport rep =
            verify_theorem_bound(inst.mu, inst.nu, inst.tau, inst.psi1, inst.psi2, cfg.bound_tol);
        held += rep.holds;
        os << k << ',' << n << ',' << m << ',' << inst.tau << ',' << entropy_name(inst.psi1)
           << ',' << entropy_name(inst.psi2) << ',' << rep.lhs << ',' << rep.rhs << ','
           << rep.slack << ',' << (rep.holds ? "true" : "false") << '\n';
        inst_log << to_json(inst) << '\n';
    }
    write_file(fs::path(cfg.out_dir) / "bounds.csv", os.str());
    std::cout << "bound check: " << held << "/" << cfg.bound_instances << " instances hold"
              << std::endl;
    return held == cfg.bound_instances ? 0 : 1;
}

struct SweepJob {
    ExperimentConfig cfg;
    std::string label;
};

void apply_axis(ExperimentConfig& cfg, const std::string& axis, const std::string& value) {
    if (axis == "tau") {
        cfg.train.tau = std::stod(value);
    } else if (axis == "lambda_r1") {
        cfg.train.lambda_r1 = std::stod(value);
    } else if (axis == "seed") {
        cfg.train.seed = std::stoull(value);
    } else if (axis == "psi_pair") {
        const auto colon = value.find(':');
        if (colon == std::string::npos)
            throw CLI::ValidationError("values", "psi_pair values look like kl:chi2");
        cfg.train.psi1 = entropy_from_name(value.substr(0, colon));
        cfg.train.psi2 = entropy_from_name(value.substr(colon + 1));
    } else {
        throw CLI::ValidationError("axis", "sweepable axes: tau, lambda_r1, psi_pair, seed");
    }
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ':' || c == '.' || c == '/' || c == '+') c = '_';
    return s;
}

int run_sweep(const ExperimentConfig& base, const std::string& axis,
              const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds,
              int workers) {
    std::vector<SweepJob> jobs;
    for (const std::string& v : values) {
        for (std::uint64_t seed : seeds) {
            SweepJob job;
            job.cfg = base;
            apply_axis(job.cfg, axis, v);
            if (axis != "seed") job.cfg.train.seed = seed;
            job.label = axis + "_" + sanitize(v) + "_seed" + std::to_string(job.cfg.train.seed);
            job.cfg.out_dir = (fs::path(base.out_dir) / job.label).string();
            jobs.push_back(std::move(job));
        }
    }

    struct Row {
        std::string label;
        std::uint64_t seed = 0;
        std::string status;
        EvalRecord final;
    };
    std::vector<Row> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex io;

    auto worker = [&]() {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            Row row;
            row.label = jobs[j].label;
            row.seed = jobs[j].cfg.train.seed;
            try {
                const RunOutcome out = run_training(jobs[j].cfg, /*quiet=*/true);
                row.status = out.diverged ? "diverged" : "ok";
                row.final = out.final;
            } catch (const std::exception& e) {
                row.status = std::string("failed: ") + e.what();
            }
            {
                std::lock_guard<std::mutex> lock(io);
                std::cout << row.label << ": " << row.status << "  kl=" << row.final.kl
                          << std::endl;
            }
            rows[j] = std::move(row);
        }
    };

    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::ostringstream os;
    os.precision(12);
    os << "run,axis,seed,status,kl,monotonicity,outlier_mass,loss_v,loss_t\n";
    for (const Row& r : rows)
        os << r.label << ',' << axis << ',' << r.seed << ',' << r.status << ',' << r.final.kl
           << ',' << r.final.monotonicity << ',' << r.final.outlier_mass << ','
           << r.final.loss_v << ',' << r.final.loss_t << '\n';
    fs::create_directories(base.out_dir);
    write_file(fs::path(base.out_dir) / "sweep_summary.csv", os.str());
    std::cout << "sweep summary: " << (fs::path(base.out_dir) / "sweep_summary.csv").string()
              << std::endl;
    return 0;
}

int run_report(const std::vector<std::string>& dirs) {
    struct Row {
        std::string dir, variant, status;
        double tau = 0, lambda = 0, kl = 0, mono = 0, outlier = 0;
    };
    std::vector<Row> rows;
    for (const std::string& d : dirs) {
        const fs::path p = fs::path(d) / "summary.json";
        if (!fs::exists(p)) {
            std::cerr << "warning: " << p.string() << " missing, skipping row" << std::endl;
            continue;
        }
        std::ifstream f(p);
        nlohmann::json j;
        f >> j;
        Row r;
        r.dir = d;
        r.variant = j.value("variant", "?");
        r.status = j.value("diverged", false) ? "diverged" : "ok";
        r.tau = j.value("tau", 0.0);
        r.lambda = j.value("lambda_r1", 0.0);
        r.kl = j["final"].value("kl", 0.0);
        r.mono = j["final"].value("monotonicity", 0.0);
        r.outlier = j["final"].value("outlier_mass", 0.0);
        rows.push_back(r);
    }
    if (rows.empty()) {
        std::cerr << "report: no readable runs" << std::endl;
        return 1;
    }
    std::cout << std::left << std::setw(34) << "run" << std::setw(10) << "variant"
              << std::setw(8) << "tau" << std::setw(9) << "lambda" << std::setw(10) << "status"
              << std::setw(10) << "kl" << std::setw(8) << "mono" << "outlier\n";
    std::cout << std::fixed << std::setprecision(4);
    for (const Row& r : rows)
        std::cout << std::left << std::setw(34) << r.dir << std::setw(10) << r.variant
                  << std::setw(8) << r.tau << std::setw(9) << r.lambda << std::setw(10)
                  << r.status << std::setw(10) << r.kl << std::setw(8) << r.mono << r.outlier
                  << '\n';
    return 0;
}

int run_selftest() {
    int failures = 0;
    auto check = [&](bool ok, const std::string& what) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << std::endl;
        if (!ok) ++failures;
    };

    {
        Rng rng(1);
        bool ok = true;
        for (int rep = 0; rep < 1000 && ok; ++rep) {
            const double x = 5.0 * rng.uniform();
            const double y = -3.0 + 6.0 * rng.uniform();
            for (Entropy e : {Entropy::KL, Entropy::Chi2}) {
                const double p = psi(e, x);
                if (std::isfinite(p) && x * y > p + psi_star(e, y) + 1e-9) ok = false;
            }
        }
        check(ok, "Fenchel-Young inequality on 1000 random pairs");
    }
    {
        bool ok = true;
        for (Entropy e : {Entropy::KL, Entropy::Chi2})
            for (double y = -3.0; y <= 3.0; y += 0.25)
                if (std::abs(psi_star(e, y) - conjugate_bruteforce(e, y, 0, 25, 200000)) > 1e-3)
                    ok = false;
        check(ok, "conjugates match the brute-force grid oracle");
    }
    {
        bool ok = true;
        Rng rng(2);
        for (int rep = 0; rep < 200 && ok; ++rep) {
            const double x = -3.0 + 6.0 * rng.uniform();
            for (Entropy e : {Entropy::KL, Entropy::Chi2, Entropy::Softplus}) {
                if (e == Entropy::Chi2 && std::abs(x + 2.0) < 1e-3) continue;
                const double fd = (psi_star(e, x + 1e-6) - psi_star(e, x - 1e-6)) / 2e-6;
                if (std::abs(psi_star_prime(e, x) - fd) > 1e-6) ok = false;
            }
        }
        check(ok, "conjugate derivatives match finite differences");
    }
    {
        ArchSpec arch;
        arch.hidden = 6;
        arch.blocks = 2;
        const ModelParams pot = init_params(NetKind::Potential, arch, 3);
        Tape t;
        const NodeId base = place_params(t, pot);
        const NodeId y = t.leaf(0.4);
        t.backward(taped_potential_forward(t, pot, base, {&y, 1}));
        const double xp = 0.4 + 1e-5, xm = 0.4 - 1e-5;
        const double fd =
            (potential_forward(pot, {&xp, 1}) - potential_forward(pot, {&xm, 1})) / 2e-5;
        check(std::abs(t.adjoint(y) - fd) < 1e-6, "autodiff input gradient matches FD");
    }
    {
        TrainConfig cfg;
        cfg.arch.hidden = 6;
        cfg.arch.blocks = 2;
        cfg.lambda_r1 = 0.05;
        Rng rng(5);
        const ModelParams gen = init_params(NetKind::Generator, cfg.arch, 8);
        const ModelParams pot = init_params(NetKind::Potential, cfg.arch, 9);
        Batch X, Y, Z;
        X.n = Y.n = Z.n = 8;
        X.dim = Y.dim = Z.dim = 1;
        X.data.resize(8); Y.data.resize(8); Z.data.resize(8);
        for (int i = 0; i < 8; ++i) {
            X.data[i] = rng.normal();
            Y.data[i] = rng.normal();
            Z.data[i] = rng.normal();
        }
        const BatchGrad a = potential_grad(cfg, pot, gen, X, Y, Z, ExecPolicy::Serial);
        const BatchGrad b = potential_grad(cfg, pot, gen, X, Y, Z, ExecPolicy::Parallel);
        check(a.loss == b.loss && a.grad == b.grad,
              "serial and parallel batch gradients are bitwise identical");
    }
    {
        const DiscreteMeasure mu{{-0.5, 0.5}, {0.5, 0.5}};
        const DiscreteMeasure nu{{0.0, 1.0}, {0.3, 0.7}};
        const BoundReport rep = verify_theorem_bound(mu, nu, 0.1, Entropy::KL, Entropy::KL, 1e-7);
        check(rep.holds, "marginal-divergence bound holds on a fixed instance");
    }
    {
        Rng rng(6);
        std::vector<double> p(2000), q(2000);
        for (double& v : p) v = rng.normal();
        for (double& v : q) v = rng.normal();
        const double kl = knn_kl_estimate(p, 2000, q, 2000, 1, 2, ExecPolicy::Parallel);
        check(std::abs(kl) < 0.1, "same-distribution kNN KL estimate is near zero");
    }
    std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"toy lab for semi-dual unbalanced optimal transport generative training"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string experiment = "matching", variant = "uotm", psi1 = "kl", psi2 = "kl";
    std::string activation = "silu";
    bool serial = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--variant", variant, "uotm | otm | fixed_mu");
        sub->add_option("--tau", cfg.train.tau, "cost scale");
        sub->add_option("--psi1", psi1, "identity | kl | chi2 | softplus");
        sub->add_option("--psi2", psi2, "identity | kl | chi2 | softplus");
        sub->add_option("--lambda", cfg.train.lambda_r1, "input-gradient penalty weight");
        sub->add_option("--batch", cfg.train.batch_size, "batch size");
        sub->add_option("--epochs", cfg.train.epochs, "training epochs");
        sub->add_option("--disc-steps", cfg.train.disc_steps, "potential steps per generator step");
        sub->add_option("--lr", cfg.train.lr_potential, "learning rate (both nets)");
        sub->add_option("--lr-generator", cfg.train.lr_generator,
                        "generator learning rate (defaults to --lr)");
        sub->add_option("--seed", cfg.train.seed, "master seed");
        sub->add_option("--eval-interval", cfg.train.eval_interval, "epochs between evals");
        sub->add_option("--hidden", cfg.train.arch.hidden, "hidden width");
        sub->add_option("--blocks", cfg.train.arch.blocks, "residual blocks");
        sub->add_option("--activation", activation, "silu | relu | tanh");
        sub->add_option("--dataset-n", cfg.dataset_n, "points per toy dataset");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_flag("--serial", serial, "disable OpenMP kernels");
        sub->set_config("--config", "", "key=value config file (flags override)");
    };

    auto* run = app.add_subcommand("run", "run one experiment");
    run->add_option("experiment", experiment,
                    "matching | outlier | bound_check | ablation_lambda | ablation_tau | "
                    "ablation_psi");
    run->add_option("--instances", cfg.bound_instances, "instances for bound_check");
    run->add_option("--bound-tol", cfg.bound_tol, "solver tolerance for bound_check");
    add_common(run);

    auto* sweep = app.add_subcommand("sweep", "run one config across an axis of values");
    std::string axis = "tau";
    std::vector<std::string> values;
    std::vector<std::uint64_t> seeds = {0};
    int workers = 1;
    sweep->add_option("experiment", experiment, "matching | outlier");
    sweep->add_option("--axis", axis, "tau | lambda_r1 | psi_pair | seed")->required();
    sweep->add_option("--values", values, "axis values (psi_pair as kl:chi2)")->required();
    sweep->add_option("--seeds", seeds, "seeds per value");
    sweep->add_option("--workers", workers, "concurrent runs");
    add_common(sweep);

    auto* report = app.add_subcommand("report", "consolidate finished runs into a table");
    std::vector<std::string> report_dirs;
    report->add_option("dirs", report_dirs, "run directories")->required();

    auto* bound = app.add_subcommand("bound-check", "verify the marginal-divergence bound");
    bound->add_option("--instances", cfg.bound_instances, "random instances");
    bound->add_option("--bound-tol", cfg.bound_tol, "solver tolerance");
    bound->add_option("--seed", cfg.train.seed, "master seed");
    bound->add_option("--out", cfg.out_dir, "output directory");

    auto* selftest = app.add_subcommand("selftest", "run the built-in property checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        cfg.experiment = experiment_from_name(experiment);
        cfg.variant = variant_from_name(variant);
        cfg.train.psi1 = entropy_from_name(psi1);
        cfg.train.psi2 = entropy_from_name(psi2);
        cfg.train.arch.act = activation_from_name(activation);
        cfg.train.exec = serial ? ExecPolicy::Serial : ExecPolicy::Parallel;
        const bool lr_gen_given =
            run->count("--lr-generator") + sweep->count("--lr-generator") > 0;
        if (!lr_gen_given) cfg.train.lr_generator = cfg.train.lr_potential;

        if (selftest->parsed()) return run_selftest();
        if (report->parsed()) return run_report(report_dirs);
        if (bound->parsed()) return run_bound_check(cfg);

        if (sweep->parsed()) {
            cfg.train.validate();
            return run_sweep(cfg, axis, values, seeds, workers);
        }

        // run
        if (cfg.experiment == Experiment::BoundCheck) return run_bound_check(cfg);
        if (cfg.experiment == Experiment::AblationLambda)
            return run_sweep(cfg, "lambda_r1", {"0", "0.01", "0.1"}, {cfg.train.seed}, 1);
        if (cfg.experiment == Experiment::AblationTau)
            return run_sweep(cfg, "tau", {"0.02", "0.1", "1"}, {cfg.train.seed}, 1);
        if (cfg.experiment == Experiment::AblationPsi)
            return run_sweep(cfg, "psi_pair",
                             {"kl:kl", "chi2:chi2", "kl:chi2", "chi2:kl", "softplus:softplus"},
                             {cfg.train.seed}, 1);
        cfg.train.validate();
        const RunOutcome out = run_training(cfg);
        if (out.diverged) {
            std::cerr << "run diverged: " << out.note << std::endl;
            return 1;
        }
        return 0;
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << std::endl;
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
