#include "attacknet/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace attacknet {

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    if (input_h == 0 || input_w == 0 || input_h % 4 != 0 || input_w % 4 != 0) {
        throw ConfigError("input_h and input_w must be positive and divisible by 4");
    }
    if (input_channels == 0) throw ConfigError("input_channels must be >= 1");
    if (phase1_filters == 0 || phase2_filters == 0) throw ConfigError("filter counts must be >= 1");
    if (double_filters && phase2_filters != 2 * phase1_filters) {
        throw ConfigError("phase2_filters must equal 2*phase1_filters when doubling is on");
    }
    if (!(leaky_alpha >= 0.0f && leaky_alpha < 1.0f)) {
        throw ConfigError("leaky_alpha must be in [0,1)");
    }
    if (dense_width == 0) throw ConfigError("dense_width must be >= 1");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (!(dropout_conv >= 0.0f && dropout_conv < 1.0f) ||
        !(dropout_dense >= 0.0f && dropout_dense < 1.0f)) {
        throw ConfigError("dropout rates must be in [0,1)");
    }
    if (!(lr > 0.0f)) throw ConfigError("lr must be > 0");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
    if (patience == 0) throw ConfigError("patience must be >= 1");
}

namespace {

std::string fmt_f32(float v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

}  // namespace

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    os << "adam_beta1=" << fmt_f32(adam_beta1) << "\n";
    os << "adam_beta2=" << fmt_f32(adam_beta2) << "\n";
    os << "adam_eps=" << fmt_f32(adam_eps) << "\n";
    os << "batch_size=" << batch_size << "\n";
    os << "dense_width=" << dense_width << "\n";
    os << "double_filters=" << (double_filters ? 1 : 0) << "\n";
    os << "dropout_conv=" << fmt_f32(dropout_conv) << "\n";
    os << "dropout_dense=" << fmt_f32(dropout_dense) << "\n";
    os << "input_channels=" << input_channels << "\n";
    os << "input_h=" << input_h << "\n";
    os << "input_w=" << input_w << "\n";
    os << "leaky_alpha=" << fmt_f32(leaky_alpha) << "\n";
    os << "lr=" << fmt_f32(lr) << "\n";
    os << "max_epochs=" << max_epochs << "\n";
    os << "num_classes=" << num_classes << "\n";
    os << "patience=" << patience << "\n";
    os << "phase1_filters=" << phase1_filters << "\n";
    os << "phase2_filters=" << phase2_filters << "\n";
    os << "seed=" << seed << "\n";
    return os.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto strip = [](std::string& s) {
            const auto b2 = s.find_first_not_of(" \t");
            const auto e2 = s.find_last_not_of(" \t");
            s = (b2 == std::string::npos) ? "" : s.substr(b2, e2 - b2 + 1);
        };
        strip(key);
        strip(val);
        try {
            if (key == "adam_beta1") cfg.adam_beta1 = std::stof(val);
            else if (key == "adam_beta2") cfg.adam_beta2 = std::stof(val);
            else if (key == "adam_eps") cfg.adam_eps = std::stof(val);
            else if (key == "batch_size") cfg.batch_size = std::stoul(val);
            else if (key == "dense_width") cfg.dense_width = std::stoul(val);
            else if (key == "double_filters") cfg.double_filters = std::stoul(val) != 0;
            else if (key == "dropout_conv") cfg.dropout_conv = std::stof(val);
            else if (key == "dropout_dense") cfg.dropout_dense = std::stof(val);
            else if (key == "input_channels") cfg.input_channels = std::stoul(val);
            else if (key == "input_h") cfg.input_h = std::stoul(val);
            else if (key == "input_w") cfg.input_w = std::stoul(val);
            else if (key == "leaky_alpha") cfg.leaky_alpha = std::stof(val);
            else if (key == "lr") cfg.lr = std::stof(val);
            else if (key == "max_epochs") cfg.max_epochs = std::stoul(val);
            else if (key == "num_classes") cfg.num_classes = std::stoul(val);
            else if (key == "patience") cfg.patience = std::stoul(val);
            else if (key == "phase1_filters") cfg.phase1_filters = std::stoul(val);
            else if (key == "phase2_filters") cfg.phase2_filters = std::stoul(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else throw ConfigError("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw ConfigError("config key " + key + ": bad value '" + val + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("config key " + key + ": value out of range");
        }
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Parameter enumeration
// ---------------------------------------------------------------------------

namespace {

template <typename ModelT, typename Named>
std::vector<Named> enumerate_params(ModelT& m) {
    std::vector<Named> out;
    for (int i = 0; i < 6; ++i) {
        out.push_back({"conv" + std::to_string(i + 1) + ".w", &m.conv_w[i]});
        out.push_back({"conv" + std::to_string(i + 1) + ".b", &m.conv_b[i]});
    }
    for (int i = 0; i < 6; ++i) {
        out.push_back({"bn" + std::to_string(i + 1) + ".gamma", &m.bn[i].gamma});
        out.push_back({"bn" + std::to_string(i + 1) + ".beta", &m.bn[i].beta});
    }
    out.push_back({"dense1.w", &m.dense1_w});
    out.push_back({"dense1.b", &m.dense1_b});
    out.push_back({"dense2.w", &m.dense2_w});
    out.push_back({"dense2.b", &m.dense2_b});
    return out;
}

}  // namespace

std::vector<NamedTensor> Model::params() { return enumerate_params<Model, NamedTensor>(*this); }

std::vector<NamedTensorView> Model::params() const {
    return enumerate_params<const Model, NamedTensorView>(*this);
}

// ---------------------------------------------------------------------------
// Build / init
// ---------------------------------------------------------------------------

Model build_model(const ModelConfig& cfg, Prng& p) {
    cfg.validate();
    Model m;
    m.cfg = cfg;

    const std::size_t c_in = cfg.input_channels;
    const std::size_t f1 = cfg.phase1_filters;
    const std::size_t f2 = cfg.phase2_filters;
    const std::size_t in_ch[6] = {c_in, f1, f1, f1, f2, f2};
    const std::size_t out_ch[6] = {f1, f1, f1, f2, f2, f2};

    auto he_uniform = [&p](std::vector<std::size_t> shape, std::size_t fan_in) {
        const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
        return prng_uniform(p, std::move(shape), -limit, limit);
    };

    for (int i = 0; i < 6; ++i) {
        m.conv_w[i] = he_uniform({out_ch[i], in_ch[i], 3, 3}, in_ch[i] * 9);
        m.conv_b[i] = Tensor({out_ch[i]}, 0.0f);
        m.bn[i] = nn::BatchNormState::identity(out_ch[i]);
    }

    const std::size_t flat = cfg.flatten_dim();
    m.dense1_w = he_uniform({flat, cfg.dense_width}, flat);
    m.dense1_b = Tensor({cfg.dense_width}, 0.0f);
    m.dense2_w = he_uniform({cfg.dense_width, cfg.num_classes}, cfg.dense_width);
    m.dense2_b = Tensor({cfg.num_classes}, 0.0f);

    for (auto& pr : m.params()) {
        m.adam_m.push_back(Tensor(pr.tensor->shape(), 0.0f));
        m.adam_v.push_back(Tensor(pr.tensor->shape(), 0.0f));
    }
    m.adam_t = 0;
    return m;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

Tensor Model::forward(const Tensor& x, nn::Mode mode, Prng* prng, ForwardCache* cache) {
    if (x.rank() != 4 || x.dim(1) != cfg.input_channels || x.dim(2) != cfg.input_h ||
        x.dim(3) != cfg.input_w) {
        throw ShapeError("forward: input must be [N," + std::to_string(cfg.input_channels) + "," +
                         std::to_string(cfg.input_h) + "," + std::to_string(cfg.input_w) +
                         "], got " + shape_str(x));
    }
    const bool train = mode == nn::Mode::Train;
    if (train && prng == nullptr) throw ConfigError("forward: train mode requires a Prng");

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.mode = mode;
    const float alpha = cfg.leaky_alpha;
    Prng dummy(0);
    Prng& rng = prng ? *prng : dummy;

    auto conv_bn = [&](const Tensor& in, int i) {
        auto [y1, cc] = nn::conv2d_forward(in, conv_w[i], conv_b[i]);
        c.conv[i] = std::move(cc);
        auto [y2, bc] = nn::batchnorm_forward(y1, bn[i], mode);
        c.bn[i] = std::move(bc);
        return y2;
    };

    // Phase 1
    auto [a1, a1c] = nn::leaky_relu_forward(conv_bn(x, 0), alpha);
    c.act1 = std::move(a1c);
    auto [a2, a2c] = nn::leaky_relu_forward(conv_bn(a1, 1), alpha);
    c.act2 = std::move(a2c);
    Tensor a3 = conv_bn(a2, 2);
    auto [p1a, r1c] = nn::leaky_relu_forward(nn::residual_add(a3, a1), alpha);
    c.act_r1 = std::move(r1c);
    auto [p1, p1c] = nn::maxpool2x2_forward(p1a);
    c.pool1 = std::move(p1c);
    auto [d1, d1c] = nn::dropout_forward(p1, cfg.dropout_conv, mode, rng);
    c.drop1 = std::move(d1c);

    // Phase 2
    auto [b1, b1c] = nn::leaky_relu_forward(conv_bn(d1, 3), alpha);
    c.act4 = std::move(b1c);
    auto [b2, b2c] = nn::leaky_relu_forward(conv_bn(b1, 4), alpha);
    c.act5 = std::move(b2c);
    Tensor b3 = conv_bn(b2, 5);
    auto [p2a, r2c] = nn::leaky_relu_forward(nn::residual_add(b3, b1), alpha);
    c.act_r2 = std::move(r2c);
    c.phase2_activation = p2a;
    auto [p2, p2c] = nn::maxpool2x2_forward(p2a);
    c.pool2 = std::move(p2c);
    auto [d2, d2c] = nn::dropout_forward(p2, cfg.dropout_conv, mode, rng);
    c.drop2 = std::move(d2c);

    // Head
    c.conv_stack_out_shape = d2.shape();
    Tensor flat = d2.reshaped({d2.dim(0), cfg.flatten_dim()});
    auto [z1, de1] = nn::dense_forward(flat, dense1_w, dense1_b);
    c.dense1 = std::move(de1);
    auto [t1, tc] = nn::tanh_forward(z1);
    c.tanh1 = std::move(tc);
    auto [dd, ddc] = nn::dropout_forward(t1, cfg.dropout_dense, mode, rng);
    c.drop_dense = std::move(ddc);
    auto [logits, de2] = nn::dense_forward(dd, dense2_w, dense2_b);
    c.dense2 = std::move(de2);

    return nn::softmax(logits);
}

std::vector<Tensor> Model::backward(const ForwardCache& c, const Tensor& dlogits) {
    if (c.mode != nn::Mode::Train) throw ConfigError("backward requires a train-mode cache");
    const float alpha = cfg.leaky_alpha;

    std::vector<Tensor> g(28);
    auto gi_conv_w = [](int i) { return 2 * i; };
    auto gi_conv_b = [](int i) { return 2 * i + 1; };
    auto gi_bn_gamma = [](int i) { return 12 + 2 * i; };
    auto gi_bn_beta = [](int i) { return 12 + 2 * i + 1; };

    // Head
    auto [ddd, dw2, db2] = nn::dense_backward(c.dense2, dlogits, dense2_w);
    g[26] = std::move(dw2);
    g[27] = std::move(db2);
    Tensor dt1 = nn::dropout_backward(c.drop_dense, ddd);
    Tensor dz1 = nn::tanh_backward(c.tanh1, dt1);
    auto [dflat, dw1, db1] = nn::dense_backward(c.dense1, dz1, dense1_w);
    g[24] = std::move(dw1);
    g[25] = std::move(db1);
    Tensor dd2 = dflat.reshaped(c.conv_stack_out_shape);

    auto bn_conv_back = [&](const Tensor& dy, int i) {
        auto [dxbn, dgamma, dbeta] = nn::batchnorm_backward(c.bn[i], dy, bn[i]);
        g[gi_bn_gamma(i)] = std::move(dgamma);
        g[gi_bn_beta(i)] = std::move(dbeta);
        auto [dx, dw, db] = nn::conv2d_backward(c.conv[i], dxbn, conv_w[i]);
        g[gi_conv_w(i)] = std::move(dw);
        g[gi_conv_b(i)] = std::move(db);
        return dx;
    };

    // Phase 2
    Tensor dp2 = nn::dropout_backward(c.drop2, dd2);
    Tensor dp2a = nn::maxpool2x2_backward(c.pool2, dp2);
    Tensor dr2 = nn::leaky_relu_backward(c.act_r2, dp2a, alpha);
    Tensor db1_main = bn_conv_back(dr2, 5);            // through conv6
    Tensor db2_ = nn::leaky_relu_backward(c.act5, db1_main, alpha);
    Tensor db1_from5 = bn_conv_back(db2_, 4);          // through conv5
    Tensor db1_total = add(db1_from5, dr2);            // residual skip
    Tensor db1_act = nn::leaky_relu_backward(c.act4, db1_total, alpha);
    Tensor dd1 = bn_conv_back(db1_act, 3);             // through conv4

    // Phase 1
    Tensor dp1 = nn::dropout_backward(c.drop1, dd1);
    Tensor dp1a = nn::maxpool2x2_backward(c.pool1, dp1);
    Tensor dr1 = nn::leaky_relu_backward(c.act_r1, dp1a, alpha);
    Tensor da1_main = bn_conv_back(dr1, 2);            // through conv3
    Tensor da2 = nn::leaky_relu_backward(c.act2, da1_main, alpha);
    Tensor da1_from2 = bn_conv_back(da2, 1);           // through conv2
    Tensor da1_total = add(da1_from2, dr1);            // residual skip
    Tensor da1_act = nn::leaky_relu_backward(c.act1, da1_total, alpha);
    bn_conv_back(da1_act, 0);                          // through conv1 (dx discarded)

    return g;
}

Tensor Model::backward_to_phase2_tap(const ForwardCache& c, const Tensor& dlogits) const {
    auto [ddd, dw2, db2] = nn::dense_backward(c.dense2, dlogits, dense2_w);
    Tensor dt1 = nn::dropout_backward(c.drop_dense, ddd);
    Tensor dz1 = nn::tanh_backward(c.tanh1, dt1);
    auto [dflat, dw1, db1] = nn::dense_backward(c.dense1, dz1, dense1_w);
    Tensor dd2 = dflat.reshaped(c.conv_stack_out_shape);
    Tensor dp2 = nn::dropout_backward(c.drop2, dd2);
    return nn::maxpool2x2_backward(c.pool2, dp2);
}

// ---------------------------------------------------------------------------
// Budget accounting
// ---------------------------------------------------------------------------

std::size_t param_count(const Model& m) {
    std::size_t n = 0;
    for (const auto& pr : m.params()) n += pr.tensor->size();
    return n;
}

// FLOP convention (forward pass, batch 1):
//   conv:      2 * K^2 * Cin * Cout * Hout * Wout  +  Cout * Hout * Wout (bias adds)
//   dense:     2 * D * M  +  M (bias adds)
//   residual:  1 per element
//   softmax:   4 per class (exp, subtract, add, divide)
//   BatchNorm: 0 at inference -- the per-channel scale and shift fold into the
//              preceding convolution's weights and bias, so a deployed forward
//              pass pays nothing for it
//   LeakyReLU / maxpool: comparison-dominated, not counted as FLOPs
std::size_t flop_count(const Model& m) {
    const ModelConfig& cfg = m.cfg;
    const std::size_t h1 = cfg.input_h, w1 = cfg.input_w;
    const std::size_t h2 = h1 / 2, w2 = w1 / 2;
    const std::size_t in_ch[6] = {cfg.input_channels, cfg.phase1_filters, cfg.phase1_filters,
                                  cfg.phase1_filters, cfg.phase2_filters, cfg.phase2_filters};
    const std::size_t out_ch[6] = {cfg.phase1_filters, cfg.phase1_filters, cfg.phase1_filters,
                                   cfg.phase2_filters, cfg.phase2_filters, cfg.phase2_filters};
    const std::size_t hw[6] = {h1 * w1, h1 * w1, h1 * w1, h2 * w2, h2 * w2, h2 * w2};

    std::size_t total = 0;
    for (int i = 0; i < 6; ++i) {
        total += 2 * 9 * in_ch[i] * out_ch[i] * hw[i];  // multiply-accumulates
        total += out_ch[i] * hw[i];                     // bias adds
    }
    total += cfg.phase1_filters * h1 * w1;  // residual add, phase 1
    total += cfg.phase2_filters * h2 * w2;  // residual add, phase 2

    const std::size_t flat = cfg.flatten_dim();
    total += 2 * flat * cfg.dense_width + cfg.dense_width;
    total += 2 * cfg.dense_width * cfg.num_classes + cfg.num_classes;
    total += 4 * cfg.num_classes;  // softmax
    return total;
}

// ---------------------------------------------------------------------------
// Checkpoint: little-endian binary.
//   magic "ATKN" | u32 version | u64 adam_t | u32 config_len | config text |
//   u32 record_count | records: u32 name_len, name, u32 rank, u64 dims...,
//   f32 payload.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'A', 'T', 'K', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint truncated");
    return v;
}

void write_record(std::ostream& os, const std::string& name, const Tensor& t) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(float)));
}

std::pair<std::string, Tensor> read_record(std::istream& is) {
    const auto name_len = read_pod<std::uint32_t>(is);
    if (name_len > 4096) throw IoError("checkpoint corrupt: implausible record name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw IoError("checkpoint truncated");
    const auto rank = read_pod<std::uint32_t>(is);
    if (rank > 8) throw IoError("checkpoint corrupt: implausible tensor rank");
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(is)));
    }
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!is) throw IoError("checkpoint truncated");
    return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint64_t>(os, m.adam_t);

    const std::string cfg_text = m.cfg.to_text();
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_text.size()));
    os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

    const auto prs = m.params();
    const std::uint32_t count = static_cast<std::uint32_t>(prs.size() * 3 + 12);
    write_pod<std::uint32_t>(os, count);
    for (const auto& pr : prs) write_record(os, pr.name, *pr.tensor);
    for (std::size_t i = 0; i < prs.size(); ++i) write_record(os, "adam_m." + prs[i].name, m.adam_m[i]);
    for (std::size_t i = 0; i < prs.size(); ++i) write_record(os, "adam_v." + prs[i].name, m.adam_v[i]);
    for (int i = 0; i < 6; ++i) {
        write_record(os, "bn" + std::to_string(i + 1) + ".running_mean", m.bn[i].running_mean);
        write_record(os, "bn" + std::to_string(i + 1) + ".running_var", m.bn[i].running_var);
    }
    if (!os) throw IoError("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is) throw IoError("checkpoint truncated");
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("not an AttackNet checkpoint (bad magic)");
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto adam_t = read_pod<std::uint64_t>(is);

    const auto cfg_len = read_pod<std::uint32_t>(is);
    if (cfg_len > (1u << 20)) throw IoError("checkpoint corrupt: implausible config length");
    std::string cfg_text(cfg_len, '\0');
    is.read(cfg_text.data(), cfg_len);
    if (!is) throw IoError("checkpoint truncated");
    ModelConfig cfg = ModelConfig::from_text(cfg_text);
    cfg.validate();

    Prng p(cfg.seed);
    Model m = build_model(cfg, p);
    m.adam_t = adam_t;

    std::map<std::string, Tensor*> dests;
    auto prs = m.params();
    for (std::size_t i = 0; i < prs.size(); ++i) {
        dests[prs[i].name] = prs[i].tensor;
        dests["adam_m." + prs[i].name] = &m.adam_m[i];
        dests["adam_v." + prs[i].name] = &m.adam_v[i];
    }
    for (int i = 0; i < 6; ++i) {
        dests["bn" + std::to_string(i + 1) + ".running_mean"] = &m.bn[i].running_mean;
        dests["bn" + std::to_string(i + 1) + ".running_var"] = &m.bn[i].running_var;
    }

    const auto count = read_pod<std::uint32_t>(is);
    for (std::uint32_t r = 0; r < count; ++r) {
        auto [name, t] = read_record(is);
        auto it = dests.find(name);
        if (it == dests.end()) throw IoError("checkpoint corrupt: unexpected record '" + name + "'");
        if (it->second->shape() != t.shape()) {
            throw IoError("checkpoint corrupt: shape mismatch for '" + name + "'");
        }
        *it->second = std::move(t);
    }
    return m;
}

}  // namespace attacknet
