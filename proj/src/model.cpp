#include "uot/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "uot/rng.hpp"

namespace uot {

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::Silu: return "silu";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "silu") return Activation::Silu;
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation: " + name);
}

void ArchSpec::validate() const {
    if (data_dim < 1 || z_dim < 1 || hidden < 1 || blocks < 1)
        throw std::invalid_argument("arch: dimensions must be positive");
}

namespace {

std::vector<LayerShape> layer_table(NetKind kind, const ArchSpec& a) {
    std::vector<LayerShape> layers;
    std::size_t off = 0;
    auto push = [&](int in, int out) {
        LayerShape s;
        s.in = in;
        s.out = out;
        s.w_off = off;
        s.b_off = off + static_cast<std::size_t>(in) * out;
        off = s.b_off + out;
        layers.push_back(s);
    };
    const int h = a.hidden;
    if (kind == NetKind::Generator) {
        push(a.z_dim, h);  // z_fc1
        push(h, h);        // z_fc2
    }
    push(a.data_dim, h);   // input embedding
    for (int b = 0; b < a.blocks; ++b) {
        push(h, h);
        push(h, h);
    }
    push(h, h);            // out_fc1
    push(h, kind == NetKind::Generator ? a.data_dim : 1);  // out_fc2
    return layers;
}

double act_value(Activation a, double x) {
    switch (a) {
    case Activation::Silu: {
        const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                  : std::exp(x) / (1.0 + std::exp(x));
        return x * s;
    }
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

NodeId act_node(Tape& t, Activation a, NodeId x) {
    switch (a) {
    case Activation::Silu: return t.silu(x);
    case Activation::Relu: return t.relu(x);
    case Activation::Tanh: return t.tanh(x);
    }
    return x;
}

void affine(const ModelParams& p, const LayerShape& l, std::span<const double> in,
            std::span<double> out) {
    const double* w = p.flat.data() + l.w_off;
    const double* b = p.flat.data() + l.b_off;
    for (int r = 0; r < l.out; ++r) {
        double acc = b[r];
        const double* wr = w + static_cast<std::size_t>(r) * l.in;
        for (int c = 0; c < l.in; ++c) acc += wr[c] * in[c];
        out[r] = acc;
    }
}

// out_r = dot(w_row_r, in) + b_r as tape nodes
void taped_affine(Tape& t, NodeId base, const LayerShape& l,
                  std::span<const NodeId> in, std::vector<NodeId>& out,
                  std::vector<NodeId>& row_scratch) {
    out.resize(l.out);
    row_scratch.resize(l.in);
    for (int r = 0; r < l.out; ++r) {
        const NodeId w0 = base + static_cast<NodeId>(l.w_off + static_cast<std::size_t>(r) * l.in);
        for (int c = 0; c < l.in; ++c) row_scratch[c] = w0 + c;
        const NodeId d = t.dot(row_scratch, in);
        out[r] = t.add(d, base + static_cast<NodeId>(l.b_off + r));
    }
}

// u <- u + silu(fc_b(silu(fc_a(u))))
void residual_block(const ModelParams& p, const LayerShape& la, const LayerShape& lb,
                    std::vector<double>& u, std::vector<double>& t1, std::vector<double>& t2) {
    affine(p, la, u, t1);
    for (double& v : t1) v = act_value(p.arch.act, v);
    affine(p, lb, t1, t2);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += act_value(p.arch.act, t2[i]);
}

void taped_residual_block(Tape& t, const ModelParams& p, NodeId base,
                          const LayerShape& la, const LayerShape& lb,
                          std::vector<NodeId>& u, std::vector<NodeId>& t1,
                          std::vector<NodeId>& t2, std::vector<NodeId>& row) {
    taped_affine(t, base, la, u, t1, row);
    for (NodeId& n : t1) n = act_node(t, p.arch.act, n);
    taped_affine(t, base, lb, t1, t2, row);
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = t.add(u[i], act_node(t, p.arch.act, t2[i]));
}

} // namespace

std::size_t param_count(NetKind kind, const ArchSpec& arch) {
    const auto layers = layer_table(kind, arch);
    const LayerShape& last = layers.back();
    return last.b_off + last.out;
}

ModelParams init_params(NetKind kind, const ArchSpec& arch, std::uint64_t seed) {
    arch.validate();
    ModelParams p;
    p.kind = kind;
    p.arch = arch;
    p.layers = layer_table(kind, arch);
    p.flat.assign(param_count(kind, arch), 0.0);
    Rng rng(Rng::substream(seed, kind == NetKind::Generator ? 0x67656eULL : 0x706f74ULL));
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        const LayerShape& l = p.layers[li];
        double scale = std::sqrt(2.0 / l.in);
        // start the auxiliary-noise embedding small: the map stays mostly
        // deterministic at init and training grows the z influence only
        // where the loss wants genuine stochasticity
        if (kind == NetKind::Generator && li == 1) scale *= 0.1;
        const std::size_t nw = static_cast<std::size_t>(l.in) * l.out;
        for (std::size_t i = 0; i < nw; ++i) p.flat[l.w_off + i] = scale * rng.normal();
        // biases stay zero
    }
    return p;
}

void generator_forward(const ModelParams& p, std::span<const double> x,
                       std::span<const double> z, std::span<double> y_out) {
    if (p.kind != NetKind::Generator)
        throw std::invalid_argument("generator_forward: wrong net kind");
    const ArchSpec& a = p.arch;
    if (x.size() != static_cast<std::size_t>(a.data_dim) ||
        z.size() != static_cast<std::size_t>(a.z_dim) ||
        y_out.size() != static_cast<std::size_t>(a.data_dim))
        throw std::invalid_argument("generator_forward: dimension mismatch");

    std::vector<double> u(a.hidden), t1(a.hidden), t2(a.hidden), ze(a.hidden);
    // z path: two FC layers
    affine(p, p.layers[0], z, t1);
    for (double& v : t1) v = act_value(a.act, v);
    affine(p, p.layers[1], t1, ze);
    // x path: embedding + residual blocks
    affine(p, p.layers[2], x, u);
    for (int b = 0; b < a.blocks; ++b)
        residual_block(p, p.layers[3 + 2 * b], p.layers[4 + 2 * b], u, t1, t2);
    // sum embeddings, output module
    for (int i = 0; i < a.hidden; ++i) u[i] += ze[i];
    affine(p, p.layers[3 + 2 * a.blocks], u, t1);
    for (double& v : t1) v = act_value(a.act, v);
    affine(p, p.layers[4 + 2 * a.blocks], t1, y_out);
}

double potential_forward(const ModelParams& p, std::span<const double> y) {
    if (p.kind != NetKind::Potential)
        throw std::invalid_argument("potential_forward: wrong net kind");
    const ArchSpec& a = p.arch;
    if (y.size() != static_cast<std::size_t>(a.data_dim))
        throw std::invalid_argument("potential_forward: dimension mismatch");

    std::vector<double> u(a.hidden), t1(a.hidden), t2(a.hidden);
    affine(p, p.layers[0], y, u);
    for (int b = 0; b < a.blocks; ++b)
        residual_block(p, p.layers[1 + 2 * b], p.layers[2 + 2 * b], u, t1, t2);
    affine(p, p.layers[1 + 2 * a.blocks], u, t1);
    for (double& v : t1) v = act_value(a.act, v);
    double out = 0.0;
    affine(p, p.layers[2 + 2 * a.blocks], t1, {&out, 1});
    return out;
}

NodeId place_params(Tape& t, const ModelParams& p) {
    const NodeId base = static_cast<NodeId>(t.size());
    for (double v : p.flat) t.leaf(v);
    return base;
}

std::vector<NodeId> taped_generator_forward(Tape& t, const ModelParams& p, NodeId base,
                                            std::span<const NodeId> x,
                                            std::span<const NodeId> z) {
    if (p.kind != NetKind::Generator)
        throw std::invalid_argument("taped_generator_forward: wrong net kind");
    const ArchSpec& a = p.arch;
    std::vector<NodeId> u, t1, t2, ze, row, out(a.data_dim);
    taped_affine(t, base, p.layers[0], z, t1, row);
    for (NodeId& n : t1) n = act_node(t, a.act, n);
    taped_affine(t, base, p.layers[1], t1, ze, row);
    taped_affine(t, base, p.layers[2], x, u, row);
    for (int b = 0; b < a.blocks; ++b)
        taped_residual_block(t, p, base, p.layers[3 + 2 * b], p.layers[4 + 2 * b], u, t1, t2, row);
    for (int i = 0; i < a.hidden; ++i) u[i] = t.add(u[i], ze[i]);
    taped_affine(t, base, p.layers[3 + 2 * a.blocks], u, t1, row);
    for (NodeId& n : t1) n = act_node(t, a.act, n);
    taped_affine(t, base, p.layers[4 + 2 * a.blocks], t1, out, row);
    return out;
}

NodeId taped_potential_forward(Tape& t, const ModelParams& p, NodeId base,
                               std::span<const NodeId> y) {
    if (p.kind != NetKind::Potential)
        throw std::invalid_argument("taped_potential_forward: wrong net kind");
    const ArchSpec& a = p.arch;
    std::vector<NodeId> u, t1, t2, row, out(1);
    taped_affine(t, base, p.layers[0], y, u, row);
    for (int b = 0; b < a.blocks; ++b)
        taped_residual_block(t, p, base, p.layers[1 + 2 * b], p.layers[2 + 2 * b], u, t1, t2, row);
    taped_affine(t, base, p.layers[1 + 2 * a.blocks], u, t1, row);
    for (NodeId& n : t1) n = act_node(t, a.act, n);
    taped_affine(t, base, p.layers[2 + 2 * a.blocks], t1, out, row);
    return out[0];
}

std::string to_json(const ModelParams& p) {
    nlohmann::json j;
    j["kind"] = p.kind == NetKind::Generator ? "generator" : "potential";
    j["arch"] = {{"data_dim", p.arch.data_dim}, {"z_dim", p.arch.z_dim},
                 {"hidden", p.arch.hidden},     {"blocks", p.arch.blocks},
                 {"activation", activation_name(p.arch.act)}};
    j["params"] = p.flat;
    return j.dump();
}

ModelParams params_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ArchSpec a;
    a.data_dim = j.at("arch").at("data_dim").get<int>();
    a.z_dim = j.at("arch").at("z_dim").get<int>();
    a.hidden = j.at("arch").at("hidden").get<int>();
    a.blocks = j.at("arch").at("blocks").get<int>();
    a.act = activation_from_name(j.at("arch").at("activation").get<std::string>());
    const NetKind kind = j.at("kind").get<std::string>() == "generator"
                             ? NetKind::Generator : NetKind::Potential;
    ModelParams p;
    p.kind = kind;
    p.arch = a;
    p.layers = layer_table(kind, a);
    p.flat = j.at("params").get<std::vector<double>>();
    if (p.flat.size() != param_count(kind, a))
        throw std::invalid_argument("checkpoint: parameter count does not match arch");
    return p;
}

void save_params(const ModelParams& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << to_json(p) << '\n';
}

ModelParams load_params(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return params_from_json(ss.str());
}

} // namespace uot
