#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "wsdiff/classifier.hpp"
#include "wsdiff/data.hpp"
#include "wsdiff/net.hpp"
#include "wsdiff/schedule.hpp"

namespace wsdiff {

// Regression target of denoising score matching: the score of
// q(x_t | x_0) at x_t, i.e. -(x_t - alpha_t x_0) / sigma_t^2.
std::vector<double> dsm_target(std::span<const double> x0, std::span<const double> x_t,
                               const Schedule& s, double t);

// Conditioning-token layout for the baseline that embeds the raw record z:
// [0, c) class tokens, c the unlabeled token, then aux slots addressed by a
// stable hash of the candidate set.
struct TokenMap {
    int c = 0;
    int aux_slots = 64;

    int n_tokens() const { return c + 1 + aux_slots; }
    int token_for(const Supervision& z) const;
};

// Masks / reweights a base posterior by the supervision record. Falls back
// to uniform over the candidate set when the masked posterior vanishes;
// *fell_back reports that. transition may be null (raw posterior for noisy z).
std::vector<double> apply_supervision_conditioning(std::span<const double> base,
                                                   const Supervision& z,
                                                   const TransitionMatrix* transition,
                                                   bool* fell_back = nullptr);

// Classifier evaluation with gradient plumbing; caches one NetEval per
// (class, draw) so a loss on the logits can be pushed back to parameters.
struct ClsEval {
    DrawSet draws;
    std::vector<double> logits;     // c
    std::vector<NetEval> evals;     // c * draws (with_grad only)
    std::vector<double> hdiff;      // c * draws * dim (with_grad only)
    std::vector<double> ref;        // reference point
    bool with_grad = false;
};

// input_t > 0 declares x noised at that level: references become per-class
// denoised estimates (no-gradient path only).
void classifier_logits_eval(const ScoreNet& net, int num_classes, std::span<const double> x,
                            const Schedule& s, const DrawSet& draws, bool with_grad, ClsEval& out,
                            double input_t = 0.0);

void classifier_logits_backward(const ScoreNet& net, const Schedule& s, const ClsEval& eval,
                                std::span<const double> dlogits, std::span<double> grad);

// Posterior weights p(y | x_t, z) used by the weighted objective: teacher
// classifier posterior conditioned on the supervision record.
struct WeightModel {
    TimestepPlan plan;                         // draw plan for the teacher posterior
    std::vector<double> prior;                 // classifier prior
    std::optional<TransitionMatrix> transition; // for noisy z conditioning
    bool use_transition = true;
    // When set, weights come from the generating process instead of the
    // teacher classifier. Consumes no rng; used by oracle-weight checks.
    const MixtureSpec* oracle = nullptr;
};

std::vector<double> posterior_weights(const ModelPair& pair, const Schedule& s,
                                      std::span<const double> x_t, double t, const Supervision& z,
                                      const WeightModel& model, Rng& rng,
                                      bool* fell_back = nullptr);

struct BatchLoss {
    double loss = 0.0;
    std::vector<double> grad;
};

// Conditional DSM with the supervision record embedded as a token.
BatchLoss loss_vanilla(const ScoreNet& net, const Dataset& d, std::span<const int> idx,
                       const TokenMap& tokens, const Schedule& s, Rng& rng);

// Posterior-weighted DSM: || sum_y p(y|x_t,z) s(x_t,y,t) - target ||^2 with
// the continuous loss weight. Weights come from the teacher (stop-gradient).
BatchLoss loss_weighted_dsm(const ModelPair& pair, const Dataset& d, std::span<const int> idx,
                            const Schedule& s, const WeightModel& weights, Rng& rng,
                            int* fallback_count = nullptr);

// Per-record classification targets. All return a vector r with sum(r) = 1;
// the loss is -sum_y r_y log f_y and its logit gradient is f - r.
std::vector<double> pl_target(std::span<const double> f_teacher, const Supervision& z);
std::vector<double> su_target(std::span<const double> f_teacher, const Supervision& z);
std::vector<double> elr_target(std::span<const double> f_student,
                               std::span<const double> f_teacher, int observed,
                               double lambda = 1.0);

// Cross-entropy against a fixed target, plus the logit gradient computed by
// the generic log-softmax Jacobian (kept independent of the f - r identity
// so tests can compare the two).
double cross_entropy_loss(std::span<const double> target, std::span<const double> probs);
std::vector<double> cross_entropy_logit_grad(std::span<const double> target,
                                             std::span<const double> probs);

enum class TrainMethod { vanilla, weighted };

struct TrainConfig {
    TrainMethod method = TrainMethod::weighted;
    std::uint64_t seed = 0;
    int batch_size = 128;
    int iterations = 5000;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double ema_decay = 0.5;
    // At this scale the classification gradient competes with the score field
    // inside one small trunk; 0.3 keeps both terms winning their margins.
    double cls_weight = 0.3;
    double elr_lambda = 1.0;

    int width = 64;
    int depth = 3;
    int class_emb_dim = 32;
    int noise_emb_pairs = 8;
    int aux_slots = 64;

    // teacher posterior draws inside the training loop
    int posterior_draws = 4;
    double classifier_delta = 6.4;
    // classifier prior; empty means uniform
    std::vector<double> class_prior;
    // evaluation-time classifier draws
    int eval_draws = 16;
    bool reuse_noise = true;
    bool estimate_start = false;
    // evaluate the classification losses at the clean sample (default) or at
    // the generative loss's noised sample
    bool cls_input_clean = true;
    // noisy-z conditioning via the transition matrix when available
    bool noisy_weight_transition = true;
    // substitute oracle posterior weights for the teacher classifier
    // (diagnostic mode; requires the generating mixture)
    bool oracle_weights = false;

    int eval_every = 500;
    int eval_points = 256;
    int score_grid_per_dim = 21;
};

struct TrainLogRow {
    long iter = 0;
    double loss_gen = 0.0;
    double loss_cls = 0.0;
    double score_mse = std::numeric_limits<double>::quiet_NaN(); // eval iterations only
    double cls_acc = std::numeric_limits<double>::quiet_NaN();   // eval iterations only
    double wall_ms = 0.0;
};

struct TrainResult {
    ModelPair pair;
    std::vector<TrainLogRow> log;
    int weight_fallbacks = 0;
};

// Full training driver. oracle_spec enables the periodic score-MSE and
// classifier-accuracy diagnostics; transition backs noisy-z conditioning and
// is required only when the dataset carries noisy labels and
// noisy_weight_transition is set. Throws numerical_error on NaN loss.
TrainResult train(const Dataset& data, const Schedule& s, const TrainConfig& cfg,
                  const MixtureSpec* oracle_spec,
                  const std::optional<TransitionMatrix>& transition,
                  std::ostream* progress = nullptr);

} // namespace wsdiff
