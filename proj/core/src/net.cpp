#include "wsdiff/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wsdiff {

void NetConfig::validate() const {
    if (dim < 1) throw std::invalid_argument("NetConfig: dim must be >= 1");
    if (n_tokens < 1) throw std::invalid_argument("NetConfig: n_tokens must be >= 1");
    if (width < 1) throw std::invalid_argument("NetConfig: width must be >= 1");
    if (depth < 1) throw std::invalid_argument("NetConfig: depth must be >= 1");
    if (class_emb_dim < 1) throw std::invalid_argument("NetConfig: class_emb_dim must be >= 1");
    if (noise_emb_pairs < 1) throw std::invalid_argument("NetConfig: noise_emb_pairs must be >= 1");
    if (!(sigma_data > 0.0)) throw std::invalid_argument("NetConfig: sigma_data must be positive");
}

namespace {

size_t total_params(const NetConfig& c) {
    size_t n = static_cast<size_t>(c.n_tokens) * c.class_emb_dim;
    n += static_cast<size_t>(c.width) * c.input_dim() + c.width; // first layer
    n += static_cast<size_t>(c.depth - 1) * (static_cast<size_t>(c.width) * c.width + c.width);
    n += static_cast<size_t>(c.dim) * c.width + c.dim; // output layer
    return n;
}

inline double silu(double u) { return u / (1.0 + std::exp(-u)); }

inline double silu_grad(double u) {
    const double s = 1.0 / (1.0 + std::exp(-u));
    return s * (1.0 + u * (1.0 - s));
}

} // namespace

size_t ScoreNet::emb_offset() const { return 0; }

size_t ScoreNet::layer_w_offset(int l) const {
    size_t off = static_cast<size_t>(cfg.n_tokens) * cfg.class_emb_dim;
    for (int i = 0; i < l; ++i) {
        const int in = (i == 0) ? cfg.input_dim() : cfg.width;
        off += static_cast<size_t>(cfg.width) * in + cfg.width;
    }
    return off;
}

size_t ScoreNet::layer_b_offset(int l) const {
    const int in = (l == 0) ? cfg.input_dim() : cfg.width;
    return layer_w_offset(l) + static_cast<size_t>(cfg.width) * in;
}

size_t ScoreNet::out_w_offset() const { return layer_w_offset(cfg.depth); }

size_t ScoreNet::out_b_offset() const {
    return out_w_offset() + static_cast<size_t>(cfg.dim) * cfg.width;
}

ScoreNet ScoreNet::init(const NetConfig& cfg, Rng& rng) {
    cfg.validate();
    ScoreNet net;
    net.cfg = cfg;
    net.params.assign(total_params(cfg), 0.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    double* emb = net.params.data() + net.emb_offset();
    for (size_t i = 0; i < static_cast<size_t>(cfg.n_tokens) * cfg.class_emb_dim; ++i)
        emb[i] = gauss(rng);

    for (int l = 0; l < cfg.depth; ++l) {
        const int in = (l == 0) ? cfg.input_dim() : cfg.width;
        const double scale = std::sqrt(2.0 / in);
        double* w = net.params.data() + net.layer_w_offset(l);
        for (size_t i = 0; i < static_cast<size_t>(cfg.width) * in; ++i) w[i] = scale * gauss(rng);
        // biases stay zero
    }
    // output layer stays zero: a freshly initialized net denoises to c_skip * x
    return net;
}

void ScoreNet::forward_score(std::span<const double> x, int token, double sigma,
                             std::span<double> score_out, NetEval* eval) const {
    const int d = cfg.dim;
    if (static_cast<int>(x.size()) != d) throw std::invalid_argument("forward_score: bad point dimension");
    if (static_cast<int>(score_out.size()) != d)
        throw std::invalid_argument("forward_score: bad output dimension");
    if (token < 0 || token >= cfg.n_tokens)
        throw std::invalid_argument("forward_score: conditioning token out of range");
    if (!(sigma > 0.0)) throw std::domain_error("forward_score: sigma must be positive");

    const int in_dim = cfg.input_dim();
    const int w = cfg.width;
    const double sd = cfg.sigma_data;
    const double s2 = sigma * sigma;
    const double denom = s2 + sd * sd;
    const double c_skip = sd * sd / denom;
    const double c_out = sigma * sd / std::sqrt(denom);
    const double c_in = 1.0 / std::sqrt(denom);
    const double c_noise = 0.25 * std::log(sigma);

    NetEval local;
    NetEval& e = eval ? *eval : local;
    e.x.assign(x.begin(), x.end());
    e.token = token;
    e.sigma = sigma;
    e.c_skip = c_skip;
    e.c_out = c_out;
    e.c_in = c_in;
    e.input.resize(in_dim);
    e.pre.resize(static_cast<size_t>(cfg.depth) * w);
    e.act.resize(static_cast<size_t>(cfg.depth) * w);
    e.mlp_out.resize(d);

    double* input = e.input.data();
    for (int i = 0; i < d; ++i) input[i] = c_in * x[i];
    for (int k = 0; k < cfg.noise_emb_pairs; ++k) {
        const double f = std::ldexp(1.0, k); // 2^k
        input[d + 2 * k] = std::cos(f * c_noise);
        input[d + 2 * k + 1] = std::sin(f * c_noise);
    }
    const double* emb = params.data() + emb_offset() + static_cast<size_t>(token) * cfg.class_emb_dim;
    for (int i = 0; i < cfg.class_emb_dim; ++i) input[d + 2 * cfg.noise_emb_pairs + i] = emb[i];

    const double* cur = input;
    int cur_dim = in_dim;
    for (int l = 0; l < cfg.depth; ++l) {
        const double* wl = params.data() + layer_w_offset(l);
        const double* bl = params.data() + layer_b_offset(l);
        double* pre = e.pre.data() + static_cast<size_t>(l) * w;
        double* act = e.act.data() + static_cast<size_t>(l) * w;
        for (int i = 0; i < w; ++i) {
            const double* row = wl + static_cast<size_t>(i) * cur_dim;
            double s = bl[i];
            for (int j = 0; j < cur_dim; ++j) s += row[j] * cur[j];
            pre[i] = s;
            act[i] = silu(s);
        }
        cur = act;
        cur_dim = w;
    }

    const double* wo = params.data() + out_w_offset();
    const double* bo = params.data() + out_b_offset();
    for (int i = 0; i < d; ++i) {
        const double* row = wo + static_cast<size_t>(i) * w;
        double s = bo[i];
        for (int j = 0; j < w; ++j) s += row[j] * cur[j];
        e.mlp_out[i] = s;
        // score of the denoised estimate D(x) = c_skip x + c_out f(x)
        score_out[i] = ((c_skip - 1.0) * x[i] + c_out * s) / s2;
    }
}

void ScoreNet::backward(const NetEval& e, std::span<const double> dscore,
                        std::span<double> grad) const {
    const int d = cfg.dim;
    const int w = cfg.width;
    const int in_dim = cfg.input_dim();
    if (grad.size() != params.size()) throw std::invalid_argument("backward: grad size mismatch");
    if (static_cast<int>(dscore.size()) != d)
        throw std::invalid_argument("backward: dscore size mismatch");

    const double s2 = e.sigma * e.sigma;

    // d(loss)/d(mlp_out)
    std::vector<double> dout(d);
    for (int i = 0; i < d; ++i) dout[i] = dscore[i] * e.c_out / s2;

    const double* last_act = e.act.data() + static_cast<size_t>(cfg.depth - 1) * w;
    const double* wo = params.data() + out_w_offset();
    double* g_wo = grad.data() + out_w_offset();
    double* g_bo = grad.data() + out_b_offset();
    std::vector<double> dcur(w, 0.0);
    for (int i = 0; i < d; ++i) {
        const double gi = dout[i];
        double* grow = g_wo + static_cast<size_t>(i) * w;
        const double* row = wo + static_cast<size_t>(i) * w;
        for (int j = 0; j < w; ++j) {
            grow[j] += gi * last_act[j];
            dcur[j] += gi * row[j];
        }
        g_bo[i] += gi;
    }

    std::vector<double> dprev;
    for (int l = cfg.depth - 1; l >= 0; --l) {
        const int in = (l == 0) ? in_dim : w;
        const double* pre = e.pre.data() + static_cast<size_t>(l) * w;
        const double* below = (l == 0) ? e.input.data() : e.act.data() + static_cast<size_t>(l - 1) * w;
        const double* wl = params.data() + layer_w_offset(l);
        double* g_wl = grad.data() + layer_w_offset(l);
        double* g_bl = grad.data() + layer_b_offset(l);
        dprev.assign(in, 0.0);
        for (int i = 0; i < w; ++i) {
            const double di = dcur[i] * silu_grad(pre[i]);
            if (di == 0.0) continue;
            double* grow = g_wl + static_cast<size_t>(i) * in;
            const double* row = wl + static_cast<size_t>(i) * in;
            for (int j = 0; j < in; ++j) {
                grow[j] += di * below[j];
                dprev[j] += di * row[j];
            }
            g_bl[i] += di;
        }
        dcur.swap(dprev);
    }

    // dcur now holds d(loss)/d(input); only the embedding block is trainable.
    double* g_emb = grad.data() + emb_offset() + static_cast<size_t>(e.token) * cfg.class_emb_dim;
    const double* d_embin = dcur.data() + d + 2 * cfg.noise_emb_pairs;
    for (int i = 0; i < cfg.class_emb_dim; ++i) g_emb[i] += d_embin[i];
}

void adam_step(std::span<double> params, AdamState& state, std::span<const double> grad,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grad.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

ModelPair ModelPair::init(const NetConfig& cfg, double ema_decay, Rng& rng) {
    if (!(ema_decay >= 0.0 && ema_decay < 1.0))
        throw std::invalid_argument("ModelPair: ema_decay must lie in [0,1)");
    ModelPair pair;
    pair.student = ScoreNet::init(cfg, rng);
    pair.teacher = pair.student;
    pair.ema_decay = ema_decay;
    return pair;
}

void ema_update(ModelPair& pair) {
    const double d = pair.ema_decay;
    for (size_t i = 0; i < pair.student.params.size(); ++i)
        pair.teacher.params[i] = d * pair.teacher.params[i] + (1.0 - d) * pair.student.params[i];
}

namespace {

constexpr char kMagic[8] = {'W', 'S', 'D', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& f) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!f) throw std::runtime_error("load_checkpoint: truncated file");
    return v;
}

} // namespace

void save_checkpoint(const ModelPair& pair, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    f.write(kMagic, sizeof kMagic);
    put(f, kVersion);
    const auto& c = pair.student.cfg;
    put<std::int32_t>(f, c.dim);
    put<std::int32_t>(f, c.n_tokens);
    put<std::int32_t>(f, c.width);
    put<std::int32_t>(f, c.depth);
    put<std::int32_t>(f, c.class_emb_dim);
    put<std::int32_t>(f, c.noise_emb_pairs);
    put(f, c.sigma_data);
    put(f, pair.ema_decay);
    put(f, pair.step);
    put<std::uint64_t>(f, pair.student.params.size());
    f.write(reinterpret_cast<const char*>(pair.student.params.data()),
            static_cast<std::streamsize>(pair.student.params.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(pair.teacher.params.data()),
            static_cast<std::streamsize>(pair.teacher.params.size() * sizeof(double)));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

ModelPair load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    char magic[8];
    f.read(magic, sizeof magic);
    if (!f || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("load_checkpoint: not a checkpoint file");
    const auto version = get<std::uint32_t>(f);
    if (version != kVersion)
        throw std::runtime_error("load_checkpoint: unsupported format version " +
                                 std::to_string(version));
    NetConfig c;
    c.dim = get<std::int32_t>(f);
    c.n_tokens = get<std::int32_t>(f);
    c.width = get<std::int32_t>(f);
    c.depth = get<std::int32_t>(f);
    c.class_emb_dim = get<std::int32_t>(f);
    c.noise_emb_pairs = get<std::int32_t>(f);
    c.sigma_data = get<double>(f);
    c.validate();

    ModelPair pair;
    pair.ema_decay = get<double>(f);
    pair.step = get<std::uint64_t>(f);
    const auto n = get<std::uint64_t>(f);
    if (n != total_params(c)) throw std::runtime_error("load_checkpoint: parameter count mismatch");
    pair.student.cfg = c;
    pair.teacher.cfg = c;
    pair.student.params.resize(n);
    pair.teacher.params.resize(n);
    f.read(reinterpret_cast<char*>(pair.student.params.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    f.read(reinterpret_cast<char*>(pair.teacher.params.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw std::runtime_error("load_checkpoint: truncated file");
    return pair;
}

} // namespace wsdiff
