#include "wsdiff/objectives.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "wsdiff/errors.hpp"
#include "wsdiff/linalg.hpp"
#include "wsdiff/sampler.hpp"
#include "wsdiff/score_field.hpp"

namespace wsdiff {

std::vector<double> dsm_target(std::span<const double> x0, std::span<const double> x_t,
                               const Schedule& s, double t) {
    if (x0.size() != x_t.size()) throw std::invalid_argument("dsm_target: size mismatch");
    const auto [alpha, sigma] = alpha_sigma(s, t);
    if (!(sigma > 0.0)) throw std::domain_error("dsm_target: sigma_t = 0");
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = -(x_t[i] - alpha * x0[i]) / (sigma * sigma);
    return out;
}

int TokenMap::token_for(const Supervision& z) const {
    switch (z.kind) {
        case Supervision::Kind::exact:
        case Supervision::Kind::noisy:
            if (z.label < 0 || z.label >= c) throw std::out_of_range("token_for: label out of range");
            return z.label;
        case Supervision::Kind::unlabeled:
            return c;
        case Supervision::Kind::candidate: {
            if (aux_slots < 1) throw std::invalid_argument("token_for: no aux slots");
            // hash the set bitmask byte-wise (fixed little-endian layout)
            char bytes[8];
            for (int i = 0; i < 8; ++i)
                bytes[i] = static_cast<char>((z.cset >> (8 * i)) & 0xffu);
            const std::uint64_t h = fnv1a64(std::string_view(bytes, 8));
            return c + 1 + static_cast<int>(h % static_cast<std::uint64_t>(aux_slots));
        }
    }
    throw std::invalid_argument("token_for: unknown supervision kind");
}

std::vector<double> apply_supervision_conditioning(std::span<const double> base,
                                                   const Supervision& z,
                                                   const TransitionMatrix* transition,
                                                   bool* fell_back) {
    const int c = static_cast<int>(base.size());
    if (fell_back) *fell_back = false;
    std::vector<double> w(c, 0.0);

    switch (z.kind) {
        case Supervision::Kind::exact:
            if (z.label < 0 || z.label >= c) throw std::out_of_range("conditioning: label out of range");
            w[z.label] = 1.0;
            return w;
        case Supervision::Kind::unlabeled:
            w.assign(base.begin(), base.end());
            break;
        case Supervision::Kind::candidate: {
            if (z.cset == 0) throw std::invalid_argument("conditioning: empty candidate set");
            for (int y = 0; y < c; ++y)
                if (z.in_set(y)) w[y] = base[y];
            break;
        }
        case Supervision::Kind::noisy: {
            if (z.label < 0 || z.label >= c) throw std::out_of_range("conditioning: label out of range");
            if (!transition) {
                w.assign(base.begin(), base.end());
            } else {
                if (transition->c != c) throw std::invalid_argument("conditioning: transition size mismatch");
                for (int y = 0; y < c; ++y) w[y] = base[y] * transition->at(y, z.label);
            }
            break;
        }
    }

    double sum = 0.0;
    for (double v : w) sum += v;
    if (sum > 0.0) {
        for (auto& v : w) v /= sum;
        return w;
    }

    // Degenerate posterior: fall back to uniform over whatever the record allows.
    if (fell_back) *fell_back = true;
    std::fill(w.begin(), w.end(), 0.0);
    int support = 0;
    for (int y = 0; y < c; ++y) {
        const bool ok = (z.kind == Supervision::Kind::candidate) ? z.in_set(y)
                      : (z.kind == Supervision::Kind::noisy && transition)
                          ? transition->at(y, z.label) > 0.0
                          : true;
        if (ok) {
            w[y] = 1.0;
            ++support;
        }
    }
    if (support == 0) {
        // nothing maps to the observed label; keep the label itself
        w[z.label] = 1.0;
        support = 1;
    }
    for (auto& v : w) v /= support;
    return w;
}

void classifier_logits_eval(const ScoreNet& net, int num_classes, std::span<const double> x,
                            const Schedule& s, const DrawSet& draws, bool with_grad, ClsEval& out,
                            double input_t) {
    const int d = net.cfg.dim;
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("classifier_logits_eval: dimension mismatch");
    if (num_classes < 1 || num_classes > net.cfg.n_tokens)
        throw std::invalid_argument("classifier_logits_eval: class count exceeds token table");
    if (draws.dim != d) throw std::invalid_argument("classifier_logits_eval: draw dimension mismatch");
    if (with_grad && input_t > 0.0)
        throw std::logic_error("classifier_logits_eval: gradients assume a fixed reference");

    const int m = static_cast<int>(draws.tau.size());
    out.draws = draws;
    out.with_grad = with_grad;
    out.ref.assign(x.begin(), x.end());
    out.logits.assign(num_classes, 0.0);
    if (with_grad) {
        out.evals.resize(static_cast<size_t>(num_classes) * m);
        out.hdiff.assign(static_cast<size_t>(num_classes) * m * d, 0.0);
    } else {
        out.evals.clear();
        out.hdiff.clear();
    }

    // Per-class reference: the input itself, or its class-hypothesis
    // denoised estimate when the input carries noise.
    std::vector<double> refs(static_cast<size_t>(num_classes) * d);
    std::vector<double> x_buf(d), s_buf(d);
    for (int y = 0; y < num_classes; ++y) {
        double* ref = refs.data() + static_cast<size_t>(y) * d;
        if (input_t > 0.0) {
            const auto [a0, s0] = alpha_sigma(s, input_t);
            net.forward_score(x, y, s0, s_buf);
            for (int i = 0; i < d; ++i) ref[i] = x[i] / a0 + (s0 * s0 / a0) * s_buf[i];
        } else {
            std::copy(x.begin(), x.end(), ref);
        }
    }

    NetEval scratch;
    for (int j = 0; j < m; ++j) {
        const double tau = draws.tau[j];
        const auto [alpha, sigma] = alpha_sigma(s, tau);
        const double w = elbo_weight(s, tau);
        for (int y = 0; y < num_classes; ++y) {
            const double* ref = refs.data() + static_cast<size_t>(y) * d;
            for (int i = 0; i < d; ++i)
                x_buf[i] = alpha * ref[i] + sigma * draws.eps[static_cast<size_t>(j) * d + i];
            NetEval* ev = with_grad ? &out.evals[static_cast<size_t>(y) * m + j] : &scratch;
            net.forward_score(x_buf, y, sigma, s_buf, ev);
            double err = 0.0;
            for (int i = 0; i < d; ++i) {
                const double h = x_buf[i] / alpha + (sigma * sigma / alpha) * s_buf[i];
                const double diff = h - ref[i];
                err += diff * diff;
                if (with_grad)
                    out.hdiff[(static_cast<size_t>(y) * m + j) * d + i] = diff;
            }
            out.logits[y] -= w * err;
        }
    }
    for (double v : out.logits)
        if (!std::isfinite(v)) throw numerical_error("classifier_logits_eval: non-finite logit");
}

void classifier_logits_backward(const ScoreNet& net, const Schedule& s, const ClsEval& eval,
                                std::span<const double> dlogits, std::span<double> grad) {
    if (!eval.with_grad) throw std::logic_error("classifier_logits_backward: eval lacks gradients");
    const int c = static_cast<int>(eval.logits.size());
    if (static_cast<int>(dlogits.size()) != c)
        throw std::invalid_argument("classifier_logits_backward: dlogits size mismatch");
    const int d = net.cfg.dim;
    const int m = static_cast<int>(eval.draws.tau.size());

    std::vector<double> dscore(d);
    for (int y = 0; y < c; ++y) {
        if (dlogits[y] == 0.0) continue;
        for (int j = 0; j < m; ++j) {
            const double tau = eval.draws.tau[j];
            const auto [alpha, sigma] = alpha_sigma(s, tau);
            const double w = elbo_weight(s, tau);
            // logit_y -= w * || h - ref ||^2, dh/dscore = sigma^2 / alpha
            const double k = dlogits[y] * (-2.0 * w) * (sigma * sigma / alpha);
            const double* diff = eval.hdiff.data() + (static_cast<size_t>(y) * m + j) * d;
            for (int i = 0; i < d; ++i) dscore[i] = k * diff[i];
            net.backward(eval.evals[static_cast<size_t>(y) * m + j], dscore, grad);
        }
    }
}

std::vector<double> posterior_weights(const ModelPair& pair, const Schedule& s,
                                      std::span<const double> x_t, double t, const Supervision& z,
                                      const WeightModel& model, Rng& rng, bool* fell_back) {
    const int c = static_cast<int>(model.prior.size());
    if (fell_back) *fell_back = false;

    // Exact records bypass the classifier entirely (and consume no rng).
    if (z.kind == Supervision::Kind::exact) {
        if (z.label < 0 || z.label >= c) throw std::out_of_range("posterior_weights: label out of range");
        std::vector<double> w(c, 0.0);
        w[z.label] = 1.0;
        return w;
    }

    if (model.oracle) {
        SupervisionModel sm;
        sm.prior = model.prior;
        if (model.use_transition && model.transition) sm.transition = model.transition;
        // Raw-posterior reading when no transition is configured for noisy z.
        const Supervision zc = (z.kind == Supervision::Kind::noisy && !sm.transition)
                                   ? Supervision::make_unlabeled()
                                   : z;
        return oracle_label_posterior(*model.oracle, s, x_t, zc, sm, t);
    }

    const DrawSet ds = make_plan_draws(model.plan, s, pair.teacher.cfg.dim, rng);
    ClsEval eval;
    classifier_logits_eval(pair.teacher, c, x_t, s, ds, /*with_grad=*/false, eval, t);
    const auto base = posterior_from_logits(eval.logits, model.prior);
    const TransitionMatrix* tp =
        (model.use_transition && model.transition) ? &*model.transition : nullptr;
    return apply_supervision_conditioning(base, z, tp, fell_back);
}

namespace {

// EDM denoiser weight pulled back to the score residual. The implied clean
// sample differs from x0 by (sigma^2 / alpha) times the score error, so the
// score-space weight is lambda(sigma) (sigma^2 / alpha)^2. Per-draw loss
// stays O(1) over the whole noise range, unlike lambda(sigma) alone.
double score_loss_weight(double alpha, double sigma, double sigma_data) {
    const double j = sigma * sigma / alpha;
    return edm_loss_weight(sigma, sigma_data) * j * j;
}

} // namespace

BatchLoss loss_vanilla(const ScoreNet& net, const Dataset& d, std::span<const int> idx,
                       const TokenMap& tokens, const Schedule& s, Rng& rng) {
    const int dim = d.dim;
    const double n = static_cast<double>(idx.size());
    BatchLoss out;
    out.grad.assign(net.param_count(), 0.0);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> x_t(dim), target(dim), score(dim), dscore(dim);
    NetEval eval;
    for (int i : idx) {
        const auto x0 = d.point(i);
        const int token = tokens.token_for(d.z[i]);
        const double tau = sample_train_timestep(s, rng);
        const auto [alpha, sigma] = alpha_sigma(s, tau);
        for (int k = 0; k < dim; ++k) {
            const double eps = gauss(rng);
            x_t[k] = alpha * x0[k] + sigma * eps;
            target[k] = -eps / sigma;
        }
        net.forward_score(x_t, token, sigma, score, &eval);
        const double lambda = score_loss_weight(alpha, sigma, s.sigma_data);
        const double scale = 2.0 * lambda / n;
        double sq = 0.0;
        for (int k = 0; k < dim; ++k) {
            const double diff = score[k] - target[k];
            sq += diff * diff;
            dscore[k] = scale * diff;
        }
        out.loss += lambda * sq / n;
        net.backward(eval, dscore, out.grad);
    }
    return out;
}

BatchLoss loss_weighted_dsm(const ModelPair& pair, const Dataset& d, std::span<const int> idx,
                            const Schedule& s, const WeightModel& weights, Rng& rng,
                            int* fallback_count) {
    const int dim = d.dim;
    const int c = static_cast<int>(weights.prior.size());
    const double n = static_cast<double>(idx.size());
    BatchLoss out;
    out.grad.assign(pair.student.param_count(), 0.0);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> x_t(dim), target(dim), score(dim), s_mix(dim), dscore(dim);
    std::vector<NetEval> evals(c);
    std::vector<int> active;
    for (int i : idx) {
        const auto x0 = d.point(i);
        const double tau = sample_train_timestep(s, rng);
        const auto [alpha, sigma] = alpha_sigma(s, tau);
        for (int k = 0; k < dim; ++k) {
            const double eps = gauss(rng);
            x_t[k] = alpha * x0[k] + sigma * eps;
            target[k] = -eps / sigma;
        }

        bool fb = false;
        const auto w = posterior_weights(pair, s, x_t, tau, d.z[i], weights, rng, &fb);
        if (fb && fallback_count) ++*fallback_count;

        active.clear();
        std::fill(s_mix.begin(), s_mix.end(), 0.0);
        for (int y = 0; y < c; ++y) {
            if (w[y] == 0.0) continue;
            pair.student.forward_score(x_t, y, sigma, score, &evals[y]);
            for (int k = 0; k < dim; ++k) s_mix[k] += w[y] * score[k];
            active.push_back(y);
        }

        const double lambda = score_loss_weight(alpha, sigma, s.sigma_data);
        const double scale = 2.0 * lambda / n;
        double sq = 0.0;
        for (int k = 0; k < dim; ++k) {
            const double diff = s_mix[k] - target[k];
            sq += diff * diff;
            dscore[k] = scale * diff;
        }
        out.loss += lambda * sq / n;
        for (int y : active) {
            std::vector<double> dy(dim);
            for (int k = 0; k < dim; ++k) dy[k] = w[y] * dscore[k];
            pair.student.backward(evals[y], dy, out.grad);
        }
    }
    return out;
}

namespace {

// Effective label mask of a supervision record: which classes it allows.
std::uint64_t record_mask(const Supervision& z, int c) {
    switch (z.kind) {
        case Supervision::Kind::exact:
        case Supervision::Kind::noisy:
            return 1ull << z.label;
        case Supervision::Kind::candidate:
            return z.cset;
        case Supervision::Kind::unlabeled:
            return (c >= 64) ? ~0ull : ((1ull << c) - 1);
    }
    throw std::invalid_argument("record_mask: unknown supervision kind");
}

} // namespace

std::vector<double> pl_target(std::span<const double> f_teacher, const Supervision& z) {
    const int c = static_cast<int>(f_teacher.size());
    const std::uint64_t mask = record_mask(z, c);
    std::vector<double> r(c, 0.0);
    double sum = 0.0;
    for (int y = 0; y < c; ++y) {
        if ((mask >> y) & 1u) {
            r[y] = f_teacher[y];
            sum += r[y];
        }
    }
    if (sum > 0.0) {
        for (auto& v : r) v /= sum;
        return r;
    }
    // teacher puts no mass on the set; fall back to uniform over it
    int support = 0;
    for (int y = 0; y < c; ++y)
        if ((mask >> y) & 1u) ++support;
    if (support == 0) throw std::invalid_argument("pl_target: empty candidate set");
    for (int y = 0; y < c; ++y) r[y] = ((mask >> y) & 1u) ? 1.0 / support : 0.0;
    return r;
}

std::vector<double> su_target(std::span<const double> f_teacher, const Supervision& z) {
    const int c = static_cast<int>(f_teacher.size());
    std::vector<double> r(c, 0.0);
    switch (z.kind) {
        case Supervision::Kind::exact:
        case Supervision::Kind::noisy:
            if (z.label < 0 || z.label >= c) throw std::out_of_range("su_target: label out of range");
            r[z.label] = 1.0;
            return r;
        case Supervision::Kind::unlabeled:
            r.assign(f_teacher.begin(), f_teacher.end());
            return r;
        case Supervision::Kind::candidate:
            throw std::invalid_argument("su_target: candidate records need the set-masked target");
    }
    throw std::invalid_argument("su_target: unknown supervision kind");
}

std::vector<double> elr_target(std::span<const double> f_student,
                               std::span<const double> f_teacher, int observed, double lambda) {
    const int c = static_cast<int>(f_student.size());
    if (static_cast<int>(f_teacher.size()) != c) throw std::invalid_argument("elr_target: size mismatch");
    if (observed < 0 || observed >= c) throw std::out_of_range("elr_target: label out of range");

    double delta = 0.0;
    for (int y = 0; y < c; ++y) delta += f_student[y] * f_teacher[y];

    std::vector<double> r(c, 0.0);
    r[observed] = 1.0;
    if (delta >= 1.0 - 1e-6) return r; // regularizer blows up; keep the plain label
    for (int y = 0; y < c; ++y)
        r[y] -= lambda * f_student[y] * (delta - f_teacher[y]) / (1.0 - delta);
    return r;
}

double cross_entropy_loss(std::span<const double> target, std::span<const double> probs) {
    if (target.size() != probs.size()) throw std::invalid_argument("cross_entropy: size mismatch");
    double loss = 0.0;
    for (size_t y = 0; y < target.size(); ++y) {
        if (target[y] == 0.0) continue;
        loss -= target[y] * std::log(std::max(probs[y], 1e-300));
    }
    return loss;
}

std::vector<double> cross_entropy_logit_grad(std::span<const double> target,
                                             std::span<const double> probs) {
    if (target.size() != probs.size()) throw std::invalid_argument("cross_entropy: size mismatch");
    const int c = static_cast<int>(target.size());
    // d(-sum_y r_y log softmax_y)/d logit_k = -sum_y r_y (1[y=k] - f_k),
    // accumulated term by term rather than via the f - r shortcut.
    std::vector<double> g(c, 0.0);
    for (int y = 0; y < c; ++y) {
        if (target[y] == 0.0) continue;
        for (int k = 0; k < c; ++k) {
            const double jac = (k == y ? 1.0 : 0.0) - probs[k];
            g[k] -= target[y] * jac;
        }
    }
    return g;
}

TrainResult train(const Dataset& data, const Schedule& s, const TrainConfig& cfg,
                  const MixtureSpec* oracle_spec,
                  const std::optional<TransitionMatrix>& transition, std::ostream* progress) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size < 1 || cfg.iterations < 1) throw std::invalid_argument("train: bad sizes");
    const int c = data.num_classes;
    const int dim = data.dim;

    const TokenMap tokens{c, cfg.aux_slots};
    NetConfig netcfg;
    netcfg.dim = dim;
    netcfg.n_tokens = tokens.n_tokens();
    netcfg.width = cfg.width;
    netcfg.depth = cfg.depth;
    netcfg.class_emb_dim = cfg.class_emb_dim;
    netcfg.noise_emb_pairs = cfg.noise_emb_pairs;
    netcfg.sigma_data = s.sigma_data;
    netcfg.validate();

    std::vector<double> prior = cfg.class_prior;
    if (prior.empty()) prior.assign(c, 1.0 / c);
    if (static_cast<int>(prior.size()) != c) throw std::invalid_argument("train: prior size mismatch");

    Rng rng = substream(cfg.seed, "train");
    TrainResult res;
    res.pair = ModelPair::init(netcfg, cfg.ema_decay, rng);

    WeightModel weights;
    weights.plan = plan_subinterval(s, cfg.classifier_delta, cfg.posterior_draws, cfg.reuse_noise);
    weights.prior = prior;
    weights.transition = transition;
    weights.use_transition = cfg.noisy_weight_transition;
    if (cfg.oracle_weights) {
        if (!oracle_spec)
            throw std::invalid_argument("train: oracle_weights requires the generating mixture");
        weights.oracle = oracle_spec;
    }

    // Classification losses reuse the same subinterval plan as the weights.
    const TimestepPlan cls_plan = weights.plan;

    // Fixed evaluation set, classified with fresh deterministic draws per eval.
    Dataset eval_set;
    TimestepPlan eval_plan;
    if (oracle_spec) {
        Rng eval_rng = substream(cfg.seed, "train-eval");
        eval_set = sample_dataset(*oracle_spec, cfg.eval_points, eval_rng);
        eval_plan = plan_subinterval(s, cfg.classifier_delta, cfg.eval_draws, cfg.reuse_noise);
    }

    AdamState adam = AdamState::init(res.pair.student.param_count());
    std::uniform_int_distribution<int> pick(0, data.size() - 1);
    std::vector<int> idx(cfg.batch_size);
    std::vector<double> grad(res.pair.student.param_count());
    const bool with_cls = cfg.method == TrainMethod::weighted && cfg.cls_weight > 0.0;

    const auto t0 = std::chrono::steady_clock::now();
    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        for (auto& i : idx) i = pick(rng);

        BatchLoss gen = (cfg.method == TrainMethod::vanilla)
                            ? loss_vanilla(res.pair.student, data, idx, tokens, s, rng)
                            : loss_weighted_dsm(res.pair, data, idx, s, weights, rng,
                                                &res.weight_fallbacks);
        grad = std::move(gen.grad);

        double loss_cls = 0.0;
        if (with_cls) {
            const double n = static_cast<double>(idx.size());
            ClsEval student_eval, teacher_eval;
            std::vector<double> dlogits(c);
            std::vector<double> noised(dim);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (int i : idx) {
                std::span<const double> x = data.point(i);
                if (!cfg.cls_input_clean) {
                    // optional variant: classify a re-noised sample instead
                    const double tau = sample_train_timestep(s, rng);
                    const auto [alpha, sigma] = alpha_sigma(s, tau);
                    for (int k = 0; k < dim; ++k) noised[k] = alpha * x[k] + sigma * gauss(rng);
                    x = noised;
                }
                const DrawSet ds = make_plan_draws(cls_plan, s, dim, rng);
                classifier_logits_eval(res.pair.student, c, x, s, ds, /*with_grad=*/true, student_eval);
                classifier_logits_eval(res.pair.teacher, c, x, s, ds, /*with_grad=*/false, teacher_eval);
                const auto f_s = posterior_from_logits(student_eval.logits, prior);
                const auto f_t = posterior_from_logits(teacher_eval.logits, prior);

                std::vector<double> r;
                switch (data.z[i].kind) {
                    case Supervision::Kind::candidate: r = pl_target(f_t, data.z[i]); break;
                    case Supervision::Kind::noisy:
                        r = elr_target(f_s, f_t, data.z[i].label, cfg.elr_lambda);
                        break;
                    default: r = su_target(f_t, data.z[i]); break;
                }
                loss_cls += cross_entropy_loss(r, f_s) / n;
                const auto g = cross_entropy_logit_grad(r, f_s);
                for (int y = 0; y < c; ++y) dlogits[y] = cfg.cls_weight * g[y] / n;
                classifier_logits_backward(res.pair.student, s, student_eval, dlogits, grad);
            }
        }

        if (!std::isfinite(gen.loss) || !std::isfinite(loss_cls))
            throw numerical_error("train: non-finite loss at iteration " + std::to_string(iter));

        adam_step(res.pair.student.params, adam, grad, cfg.lr, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);
        ema_update(res.pair);
        res.pair.step = static_cast<std::uint64_t>(iter);

        TrainLogRow row;
        row.iter = iter;
        row.loss_gen = gen.loss;
        row.loss_cls = loss_cls;
        const bool eval_now = oracle_spec && (iter % cfg.eval_every == 0 || iter == cfg.iterations);
        if (eval_now) {
            const NetScoreField field(res.pair.student, c);
            row.score_mse = score_grid_mse(field, *oracle_spec, s, cfg.score_grid_per_dim);
            Rng cls_rng = substream(cfg.seed, "train-eval-cls", static_cast<std::uint64_t>(iter));
            int hits = 0;
            for (int i = 0; i < eval_set.size(); ++i) {
                const auto post = posterior(field, eval_set.point(i), s, eval_plan, prior, cls_rng,
                                            cfg.estimate_start);
                const int pred = static_cast<int>(std::max_element(post.begin(), post.end()) -
                                                  post.begin());
                hits += pred == eval_set.y_true[i];
            }
            row.cls_acc = static_cast<double>(hits) / eval_set.size();
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        res.log.push_back(row);

        if (progress && (eval_now || iter == 1)) {
            *progress << "iter " << iter << " loss_gen " << row.loss_gen << " loss_cls "
                      << row.loss_cls;
            if (eval_now)
                *progress << " score_mse " << row.score_mse << " cls_acc " << row.cls_acc;
            *progress << "\n";
        }
    }
    return res;
}

} // namespace wsdiff
