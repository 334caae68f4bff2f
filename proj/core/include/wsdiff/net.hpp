#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wsdiff/rng.hpp"

namespace wsdiff {

struct NetConfig {
    int dim = 2;
    int n_tokens = 2;       // class tokens plus any auxiliary conditioning slots
    int width = 128;
    int depth = 3;          // hidden layers
    int class_emb_dim = 32;
    int noise_emb_pairs = 8;
    double sigma_data = 0.5;

    int input_dim() const { return dim + 2 * noise_emb_pairs + class_emb_dim; }
    void validate() const;
};

// Activations cached by a forward pass; backward() consumes them. Reuse one
// instance across calls to avoid reallocation.
struct NetEval {
    std::vector<double> x;
    int token = -1;
    double sigma = 0.0;
    double c_skip = 0.0, c_out = 0.0, c_in = 0.0;
    std::vector<double> input;
    std::vector<double> pre;  // depth * width pre-activations
    std::vector<double> act;  // depth * width activations
    std::vector<double> mlp_out;
};

// Conditioned score network. D(x) = c_skip x + c_out MLP(c_in x, emb(ln sigma), emb(token));
// the exposed prediction is the score (D(x) - x) / sigma^2.
struct ScoreNet {
    NetConfig cfg;
    std::vector<double> params;

    static ScoreNet init(const NetConfig& cfg, Rng& rng); // output layer zero-initialized

    size_t param_count() const { return params.size(); }

    // Parameter block offsets into the flat vector.
    size_t emb_offset() const;
    size_t layer_w_offset(int l) const;
    size_t layer_b_offset(int l) const;
    size_t out_w_offset() const;
    size_t out_b_offset() const;

    // score_out has cfg.dim entries; eval may be null when no backward follows.
    void forward_score(std::span<const double> x, int token, double sigma,
                       std::span<double> score_out, NetEval* eval = nullptr) const;

    // Accumulates d(loss)/d(params) into grad given d(loss)/d(score).
    void backward(const NetEval& eval, std::span<const double> dscore,
                  std::span<double> grad) const;
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;

    static AdamState init(size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

void adam_step(std::span<double> params, AdamState& state, std::span<const double> grad,
               double lr, double beta1, double beta2, double eps);

// Student/teacher pair; the teacher tracks the student by EMA.
struct ModelPair {
    ScoreNet student;
    ScoreNet teacher;
    double ema_decay = 0.5;
    std::uint64_t step = 0;

    static ModelPair init(const NetConfig& cfg, double ema_decay, Rng& rng);
};

// teacher <- decay * teacher + (1 - decay) * student
void ema_update(ModelPair& pair);

void save_checkpoint(const ModelPair& pair, const std::filesystem::path& path);
ModelPair load_checkpoint(const std::filesystem::path& path);

} // namespace wsdiff
