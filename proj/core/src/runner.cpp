#include "wsdiff/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "version.hpp"
#include "wsdiff/classifier.hpp"
#include "wsdiff/config.hpp"
#include "wsdiff/errors.hpp"
#include "wsdiff/objectives.hpp"
#include "wsdiff/oracle.hpp"
#include "wsdiff/sampler.hpp"

namespace wsdiff {

namespace {

namespace fs = std::filesystem;

struct Args {
    std::string sub;
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::optional<double> delta;
    std::optional<int> ipc;
};

[[noreturn]] void bad_args(const std::string& msg) { throw std::invalid_argument(msg); }

Args parse_args(const std::vector<std::string>& argv) {
    if (argv.empty()) bad_args("missing subcommand; try --help");
    Args a;
    a.sub = argv[0];
    for (size_t i = 1; i < argv.size(); ++i) {
        const std::string& f = argv[i];
        const auto need_value = [&](const char* flag) -> const std::string& {
            if (i + 1 >= argv.size()) bad_args(std::string(flag) + " needs a value");
            return argv[++i];
        };
        if (f == "--config") {
            a.config_path = need_value("--config");
        } else if (f == "--out") {
            a.out = need_value("--out");
        } else if (f == "--seed") {
            const std::string& v = need_value("--seed");
            std::uint64_t s = 0;
            const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
            if (ec != std::errc() || p != v.data() + v.size()) bad_args("--seed must be an integer");
            a.seed = s;
        } else if (f == "--set") {
            a.sets.push_back(need_value("--set"));
        } else if (f == "--delta") {
            const std::string& v = need_value("--delta");
            try {
                a.delta = std::stod(v);
            } catch (...) {
                bad_args("--delta must be a number");
            }
        } else if (f == "--ipc") {
            const std::string& v = need_value("--ipc");
            int n = 0;
            const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
            if (ec != std::errc() || p != v.data() + v.size()) bad_args("--ipc must be an integer");
            a.ipc = n;
        } else {
            bad_args("unknown flag \"" + f + "\"");
        }
    }
    return a;
}

ExperimentConfig resolve_config(const Args& a) {
    ExperimentConfig cfg = a.config_path.empty() ? default_config() : load_config(a.config_path);
    for (const auto& s : a.sets) apply_override(cfg, s);
    if (a.seed) apply_override(cfg, "seed=" + std::to_string(*a.seed));
    if (!a.out.empty()) cfg.out = a.out;
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot write " + p.string());
    f << text;
    if (!f) throw std::invalid_argument("write failed for " + p.string());
}

fs::path require_out(const ExperimentConfig& cfg, const char* sub) {
    if (cfg.out.empty())
        throw std::invalid_argument(std::string(sub) + " needs an output directory (--out)");
    fs::create_directories(cfg.out);
    return {cfg.out};
}

// Every artifact directory carries the exact config and version it was made with.
void write_stamps(const ExperimentConfig& cfg, const std::string& sub) {
    const fs::path dir(cfg.out);
    write_text(dir / "resolved_config.json", serialize_config(cfg));
    nlohmann::json info = {{"tool", "wsdiff"},
                           {"version", WSDIFF_VERSION},
                           {"git", WSDIFF_GIT_DESCRIBE},
                           {"subcommand", sub},
                           {"seed", cfg.seed}};
    write_text(dir / "run_info.json", info.dump(2) + "\n");
}

Dataset load_train_dataset(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out);
    fs::path src = dir / "train_data.csv";
    if (!fs::exists(src)) {
        if (cfg.corruption.mode != CorruptionMode::none)
            throw std::invalid_argument("corruption.mode is set but " + cfg.out +
                                        " has no train_data.csv; run corrupt-labels first");
        src = dir / "dataset.csv";
    }
    if (!fs::exists(src))
        throw std::invalid_argument("no dataset in " + cfg.out + "; run make-data first");
    Dataset d = read_dataset_csv(src, cfg.mixture.num_classes());
    if (d.dim != cfg.mixture.dim)
        throw std::invalid_argument("dataset dimension disagrees with the configured mixture");
    return d;
}

ModelPair load_model(const ExperimentConfig& cfg) {
    const fs::path p = fs::path(cfg.out) / "checkpoint.bin";
    if (!fs::exists(p))
        throw std::invalid_argument("no checkpoint in " + cfg.out + "; run train first");
    ModelPair pair = load_checkpoint(p);
    if (pair.student.cfg.dim != cfg.mixture.dim)
        throw std::invalid_argument("checkpoint dimension disagrees with the configured mixture");
    if (pair.student.cfg.n_tokens < cfg.mixture.num_classes())
        throw std::invalid_argument("checkpoint token table too small for the configured classes");
    return pair;
}

std::optional<TransitionMatrix> config_transition(const ExperimentConfig& cfg) {
    if (cfg.corruption.mode == CorruptionMode::noisy_symmetric ||
        cfg.corruption.mode == CorruptionMode::noisy_asymmetric)
        return corruption_transition(cfg.corruption, cfg.mixture.num_classes());
    return std::nullopt;
}

std::vector<double> uniform_prior(int c) { return std::vector<double>(c, 1.0 / c); }

int run_make_data(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = require_out(cfg, "make-data");
    Rng rng = substream(cfg.seed, "data");
    const Dataset d = sample_dataset(cfg.mixture, cfg.data.n_train, rng);
    write_dataset_csv(d, dir / "dataset.csv");
    write_stamps(cfg, "make-data");
    out << "wrote " << (dir / "dataset.csv").string() << "\n";
    return 0;
}

int run_corrupt_labels(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = require_out(cfg, "corrupt-labels");
    const fs::path src = dir / "dataset.csv";
    if (!fs::exists(src))
        throw std::invalid_argument("no dataset in " + cfg.out + "; run make-data first");
    const Dataset clean = read_dataset_csv(src, cfg.mixture.num_classes());

    Rng rng = substream(cfg.seed, "corruption");
    Dataset corrupted;
    switch (cfg.corruption.mode) {
        case CorruptionMode::none:
            corrupted = clean;
            break;
        case CorruptionMode::noisy_symmetric:
        case CorruptionMode::noisy_asymmetric:
            corrupted = corrupt_noisy(clean, corruption_transition(cfg.corruption, clean.num_classes),
                                      rng);
            break;
        case CorruptionMode::partial_random:
            corrupted = corrupt_partial(clean, PartialMode::random, cfg.corruption.q, rng);
            break;
        case CorruptionMode::partial_class_dependent:
            corrupted = corrupt_partial(clean, PartialMode::class_dependent, cfg.corruption.q, rng);
            break;
        case CorruptionMode::semi:
            corrupted = corrupt_semi(clean, cfg.corruption.labeled_fraction, rng);
            break;
    }
    write_dataset_csv(corrupted, dir / "train_data.csv");
    write_stamps(cfg, "corrupt-labels");
    out << "wrote " << (dir / "train_data.csv").string() << "\n";
    return 0;
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
    std::string s = "iter,loss_gen,loss_cls,score_mse_vs_oracle,cls_acc,wall_ms\n";
    for (const auto& r : log) {
        s += std::to_string(r.iter);
        s += ',';
        s += format_double(r.loss_gen);
        s += ',';
        s += format_double(r.loss_cls);
        s += ',';
        if (std::isfinite(r.score_mse)) s += format_double(r.score_mse);
        s += ',';
        if (std::isfinite(r.cls_acc)) s += format_double(r.cls_acc);
        s += ',';
        s += format_double(r.wall_ms);
        s += '\n';
    }
    return s;
}

int run_train(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = require_out(cfg, "train");
    const Dataset d = load_train_dataset(cfg);
    const auto transition = config_transition(cfg);
    const TrainResult res = train(d, cfg.schedule, cfg.train, &cfg.mixture, transition, &out);
    save_checkpoint(res.pair, dir / "checkpoint.bin");
    write_text(dir / "train_log.csv", train_log_csv(res.log));
    write_stamps(cfg, "train");
    if (res.weight_fallbacks > 0)
        out << "posterior fallbacks " << res.weight_fallbacks << "\n";
    out << "wrote " << (dir / "checkpoint.bin").string() << "\n";
    return 0;
}

// Prior vector of a block's prior mode; "estimate" picks the estimator that
// matches the supervision found in the training data.
std::vector<double> resolve_prior(const ExperimentConfig& cfg, PriorMode mode,
                                  const ScoreField& field, const TimestepPlan& plan,
                                  std::ostream& out) {
    const int c = cfg.mixture.num_classes();
    switch (mode) {
        case PriorMode::uniform:
            return uniform_prior(c);
        case PriorMode::true_prior:
            return cfg.mixture.prior;
        case PriorMode::estimate:
            break;
    }

    const Dataset d = load_train_dataset(cfg);
    bool any_candidate = false, any_noisy = false;
    std::vector<double> noisy_freq(c, 0.0);
    int noisy_n = 0;
    for (int i = 0; i < d.size(); ++i) {
        if (d.z[i].kind == Supervision::Kind::candidate) any_candidate = true;
        if (d.z[i].kind == Supervision::Kind::noisy) {
            any_noisy = true;
            noisy_freq[d.z[i].label] += 1.0;
            ++noisy_n;
        }
    }
    if (any_candidate) {
        Rng rng = substream(cfg.seed, "classify-prior");
        const auto uni = uniform_prior(c);
        const auto predict = [&](std::span<const double> x) {
            return posterior(field, x, cfg.schedule, plan, uni, rng, cfg.classifier.estimate_start);
        };
        return estimate_prior_pl(d, predict, 0.9, 50);
    }
    if (any_noisy) {
        for (auto& v : noisy_freq) v /= noisy_n;
        const auto t = corruption_transition(cfg.corruption, c);
        bool clipped = false;
        auto prior = solve_prior_nl(noisy_freq, t, &clipped);
        if (clipped) out << "prior_clipped,true\n";
        return prior;
    }
    return estimate_prior_su(d);
}

int run_classify(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = require_out(cfg, "classify");
    const ModelPair pair = load_model(cfg);
    const int c = cfg.mixture.num_classes();
    const NetScoreField field(pair.student, c);
    const TimestepPlan plan = plan_subinterval(cfg.schedule, cfg.classifier.delta,
                                               cfg.classifier.draws, cfg.classifier.reuse_noise);
    const auto prior = resolve_prior(cfg, cfg.classifier.prior, field, plan, out);

    Rng data_rng = substream(cfg.seed, "eval-data");
    const Dataset eval_set = sample_dataset(cfg.mixture, cfg.data.n_eval, data_rng);

    Rng rng = substream(cfg.seed, "classify");
    std::string csv = "sample_id,true_y,pred_y";
    for (int y = 0; y < c; ++y) csv += ",posterior_" + std::to_string(y);
    csv += '\n';
    int hits = 0;
    for (int i = 0; i < eval_set.size(); ++i) {
        const auto post = posterior(field, eval_set.point(i), cfg.schedule, plan, prior, rng,
                                    cfg.classifier.estimate_start);
        const int pred = static_cast<int>(std::max_element(post.begin(), post.end()) - post.begin());
        hits += pred == eval_set.y_true[i];
        csv += std::to_string(i);
        csv += ',';
        csv += std::to_string(eval_set.y_true[i]);
        csv += ',';
        csv += std::to_string(pred);
        for (int y = 0; y < c; ++y) {
            csv += ',';
            csv += format_double(post[y]);
        }
        csv += '\n';
    }
    write_text(dir / "predictions.csv", csv);
    write_stamps(cfg, "classify");
    out << "accuracy," << format_double(static_cast<double>(hits) / eval_set.size()) << "\n";
    return 0;
}

int run_plan_timesteps(const ExperimentConfig& cfg, const Args& a, std::ostream& out) {
    const double delta = a.delta.value_or(cfg.classifier.delta);
    const TimestepPlan plan = plan_subinterval(cfg.schedule, delta, cfg.classifier.draws,
                                               cfg.classifier.reuse_noise);
    std::string csv = "l,r,residual\n";
    csv += format_double(plan.l);
    csv += ',';
    csv += format_double(plan.r);
    csv += ',';
    csv += format_double(plan.residual);
    csv += '\n';
    out << csv;
    if (!cfg.out.empty()) {
        require_out(cfg, "plan-timesteps");
        write_text(fs::path(cfg.out) / "plan.csv", csv);
        write_stamps(cfg, "plan-timesteps");
    }
    return 0;
}

int run_sample(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = require_out(cfg, "sample");
    const ModelPair pair = load_model(cfg);
    const int c = cfg.mixture.num_classes();
    const NetScoreField field(pair.student, c);

    Rng rng = substream(cfg.seed, "sample");
    std::string csv = "y";
    for (int k = 0; k < cfg.mixture.dim; ++k) csv += ",x" + std::to_string(k);
    csv += '\n';
    for (int y = 0; y < c; ++y) {
        const SampleBatch batch = sample_edm(field, y, cfg.sampler.n_per_class, cfg.sampler.steps,
                                             cfg.schedule, rng, cfg.sampler.rho);
        for (int i = 0; i < batch.size(); ++i) {
            csv += std::to_string(y);
            for (double v : batch.point(i)) {
                csv += ',';
                csv += format_double(v);
            }
            csv += '\n';
        }
    }
    write_text(dir / "samples.csv", csv);
    write_stamps(cfg, "sample");
    out << "wrote " << (dir / "samples.csv").string() << "\n";
    return 0;
}

std::vector<SampleBatch> read_samples_csv(const fs::path& path, int c, int dim) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty samples file");
    std::string header = "y";
    for (int k = 0; k < dim; ++k) header += ",x" + std::to_string(k);
    if (line != header) throw std::invalid_argument("unexpected samples header in " + path.string());

    std::vector<SampleBatch> batches(c);
    for (int y = 0; y < c; ++y) {
        batches[y].y = y;
        batches[y].dim = dim;
    }
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        size_t start = 0;
        while (start <= line.size()) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (static_cast<int>(cells.size()) != dim + 1)
            throw std::invalid_argument("bad sample row at line " + std::to_string(lineno));
        int y = 0;
        auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), y);
        if (ec != std::errc() || y < 0 || y >= c)
            throw std::invalid_argument("bad class at line " + std::to_string(lineno));
        for (int k = 0; k < dim; ++k) {
            double v = 0.0;
            const std::string& cell = cells[k + 1];
            auto [pp, ec2] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec2 != std::errc() || pp != cell.data() + cell.size())
                throw std::invalid_argument("bad number at line " + std::to_string(lineno));
            batches[y].x.push_back(v);
        }
    }
    return batches;
}

int run_eval(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = require_out(cfg, "eval");
    const fs::path src = dir / "samples.csv";
    if (!fs::exists(src))
        throw std::invalid_argument("no samples in " + cfg.out + "; run sample first");
    const auto batches = read_samples_csv(src, cfg.mixture.num_classes(), cfg.mixture.dim);
    const GenMetrics m = evaluate_generation(batches, cfg.mixture);

    std::string csv = "class,mean_err,cov_err,purity\n";
    for (size_t y = 0; y < m.mean_err.size(); ++y) {
        csv += std::to_string(y);
        csv += ',';
        csv += format_double(m.mean_err[y]);
        csv += ',';
        csv += format_double(m.cov_err[y]);
        csv += ',';
        csv += format_double(m.purity[y]);
        csv += '\n';
    }
    csv += "mean,";
    csv += format_double(m.mean_mean_err);
    csv += ',';
    csv += format_double(m.mean_cov_err);
    csv += ',';
    csv += format_double(m.mean_purity);
    csv += '\n';
    write_text(dir / "gen_metrics.csv", csv);
    write_stamps(cfg, "eval");
    out << "mean_err,cov_err,purity\n"
        << format_double(m.mean_mean_err) << ',' << format_double(m.mean_cov_err) << ','
        << format_double(m.mean_purity) << "\n";
    return 0;
}

int run_condense(const ExperimentConfig& cfg, const Args& a, std::ostream& out) {
    const fs::path dir = require_out(cfg, "condense");
    const ModelPair pair = load_model(cfg);
    const int c = cfg.mixture.num_classes();
    const NetScoreField field(pair.student, c);
    const int ipc = a.ipc.value_or(cfg.sampler.ipc);
    if (ipc < 1) throw std::invalid_argument("--ipc must be >= 1");

    Rng data_rng = substream(cfg.seed, "eval-data");
    const Dataset eval_set = sample_dataset(cfg.mixture, cfg.data.n_eval, data_rng);
    Rng rng = substream(cfg.seed, "condense");
    const CondenseResult res = condense(field, cfg.schedule, ipc, cfg.sampler.steps, eval_set, rng);

    std::string csv = "ipc,accuracy\n" + std::to_string(ipc) + "," + format_double(res.accuracy) + "\n";
    write_text(dir / "condense.csv", csv);
    std::string cents = "y";
    for (int k = 0; k < cfg.mixture.dim; ++k) cents += ",x" + std::to_string(k);
    cents += '\n';
    for (int y = 0; y < c; ++y) {
        cents += std::to_string(y);
        for (double v : res.centroids[y]) {
            cents += ',';
            cents += format_double(v);
        }
        cents += '\n';
    }
    write_text(dir / "condense_centroids.csv", cents);
    write_stamps(cfg, "condense");
    out << csv;
    return 0;
}

int run_verify_theorem1(const ExperimentConfig& cfg, std::ostream& out) {
    const MixtureSpec& spec = cfg.mixture;
    const int c = spec.num_classes();
    const Schedule& s = cfg.schedule;
    const TimestepLaw law = timestep_law(s);

    SupervisionModel model;
    model.prior = spec.prior;
    model.transition = TransitionMatrix::symmetric(c, 0.3);
    model.inclusion = candidate_inclusion_matrix(PartialMode::random, c, 0.5);

    Rng rng = substream(cfg.seed, "verify-theorem1");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::discrete_distribution<int> class_pick(spec.prior.begin(), spec.prior.end());

    double max_residual = 0.0;
    std::vector<double> x(spec.dim);
    for (int trial = 0; trial < 1000; ++trial) {
        const int y = class_pick(rng);
        // x_t drawn from the forward process of a mixture sample
        const auto& cm = spec.classes[y];
        std::discrete_distribution<int> comp_pick(cm.weights.begin(), cm.weights.end());
        const auto& comp = cm.components[comp_pick(rng)];
        const Matrix l = cholesky(comp.cov);
        std::vector<double> xi(spec.dim);
        for (auto& v : xi) v = gauss(rng);
        const double tau = law.quantile(0.01 + 0.98 * uni(rng));
        const auto [alpha, sigma] = alpha_sigma(s, tau);
        for (int i = 0; i < spec.dim; ++i) {
            double m = comp.mean[i];
            for (int k = 0; k <= i; ++k) m += l.at(i, k) * xi[k];
            x[i] = alpha * m + sigma * gauss(rng);
        }

        Supervision z;
        switch (trial % 4) {
            case 0: z = Supervision::make_exact(y); break;
            case 1: {
                std::discrete_distribution<int> row(
                    model.transition->p.begin() + static_cast<size_t>(y) * c,
                    model.transition->p.begin() + static_cast<size_t>(y + 1) * c);
                z = Supervision::make_noisy(row(rng));
                break;
            }
            case 2: z = Supervision::make_unlabeled(); break;
            case 3: {
                std::uint64_t cset = 1ull << y;
                for (int j = 0; j < c; ++j)
                    if (j != y && uni(rng) < model.inclusion->at(y, j)) cset |= 1ull << j;
                z = Supervision::make_candidate(cset);
                break;
            }
        }

        const auto lhs = imprecise_conditional_score(spec, s, x, z, model, tau);
        const auto post = oracle_label_posterior(spec, s, x, z, model, tau);
        std::vector<double> rhs(spec.dim, 0.0);
        for (int yy = 0; yy < c; ++yy) {
            if (post[yy] == 0.0) continue;
            const auto sc = clean_conditional_score(spec, s, x, yy, tau);
            for (int i = 0; i < spec.dim; ++i) rhs[i] += post[yy] * sc[i];
        }
        double num = 0.0, den = 0.0;
        for (int i = 0; i < spec.dim; ++i) {
            num += (lhs[i] - rhs[i]) * (lhs[i] - rhs[i]);
            den += rhs[i] * rhs[i];
        }
        max_residual = std::max(max_residual, std::sqrt(num) / (std::sqrt(den) + 1e-12));
    }

    std::string csv = "max_residual\n" + format_double(max_residual) + "\n";
    out << csv;
    if (!cfg.out.empty()) {
        require_out(cfg, "verify-theorem1");
        write_text(fs::path(cfg.out) / "theorem1.csv", csv);
        write_stamps(cfg, "verify-theorem1");
    }
    return max_residual < 1e-8 ? 0 : 4;
}

// Central finite difference of a scalar function of the parameter vector.
double fd_max_rel_err(std::vector<double>& params, const std::vector<double>& grad,
                      const std::function<double()>& eval_loss, Rng& rng, int coords) {
    std::vector<size_t> support;
    for (size_t i = 0; i < grad.size(); ++i)
        if (std::fabs(grad[i]) > 1e-6) support.push_back(i);
    if (support.empty())
        for (size_t i = 0; i < grad.size(); ++i) support.push_back(i);

    double worst = 0.0;
    std::uniform_int_distribution<size_t> pick(0, support.size() - 1);
    for (int k = 0; k < coords; ++k) {
        const size_t i = support[pick(rng)];
        const double save = params[i];
        const double h = 1e-5 * std::max(1.0, std::fabs(save));
        params[i] = save + h;
        const double up = eval_loss();
        params[i] = save - h;
        const double down = eval_loss();
        params[i] = save;
        const double fd = (up - down) / (2.0 * h);
        const double rel = std::fabs(fd - grad[i]) / std::max({std::fabs(fd), std::fabs(grad[i]), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

int run_verify_gradients(const ExperimentConfig& cfg, std::ostream& out) {
    const int c = cfg.mixture.num_classes();
    const Schedule& s = cfg.schedule;
    Rng rng = substream(cfg.seed, "verify-gradients");

    // deliberately small so FD stays fast
    NetConfig netcfg;
    netcfg.dim = cfg.mixture.dim;
    netcfg.n_tokens = c + 1 + 4;
    netcfg.width = 16;
    netcfg.depth = 2;
    netcfg.class_emb_dim = 8;
    netcfg.noise_emb_pairs = 4;
    netcfg.sigma_data = s.sigma_data;
    ModelPair pair = ModelPair::init(netcfg, 0.5, rng);
    // break the zero output layer so gradients reach every block
    {
        std::normal_distribution<double> g(0.0, 0.05);
        for (size_t i = pair.student.out_w_offset(); i < pair.student.params.size(); ++i)
            pair.student.params[i] = g(rng);
        pair.teacher = pair.student;
        std::vector<double> jitter(pair.teacher.params.size());
        for (auto& v : jitter) v = g(rng);
        for (size_t i = 0; i < jitter.size(); ++i) pair.teacher.params[i] += 0.1 * jitter[i];
    }

    Dataset d = sample_dataset(cfg.mixture, 8, rng);
    // one record of each supervision kind
    d.z[0] = Supervision::make_exact(d.y_true[0]);
    d.z[1] = Supervision::make_noisy((d.y_true[1] + 1) % c);
    d.z[2] = Supervision::make_unlabeled();
    d.z[3] = Supervision::make_candidate((1ull << d.y_true[3]) | 1ull);
    const std::vector<int> idx = {0, 1, 2, 3, 4, 5, 6, 7};
    const TokenMap tokens{c, 4};

    WeightModel weights;
    weights.plan = plan_subinterval(s, cfg.classifier.delta, 3, true);
    weights.prior = uniform_prior(c);
    weights.transition = TransitionMatrix::symmetric(c, 0.3);

    std::string csv = "check,max_rel_err\n";
    bool ok = true;
    const auto report = [&](const std::string& name, double err, double tol) {
        csv += name + "," + format_double(err) + "\n";
        if (!(err < tol)) ok = false;
    };

    {
        // scalar probe of the raw network forward/backward pair
        std::vector<double> w(netcfg.dim), x(netcfg.dim);
        std::normal_distribution<double> g(0.0, 1.0);
        for (auto& v : w) v = g(rng);
        for (auto& v : x) v = g(rng);
        const double sigma = 0.7;
        const auto loss = [&]() {
            std::vector<double> sc(netcfg.dim);
            pair.student.forward_score(x, 1, sigma, sc);
            return dot(w, sc);
        };
        std::vector<double> grad(pair.student.param_count(), 0.0);
        NetEval eval;
        std::vector<double> sc(netcfg.dim);
        pair.student.forward_score(x, 1, sigma, sc, &eval);
        pair.student.backward(eval, w, grad);
        report("net_forward", fd_max_rel_err(pair.student.params, grad, loss, rng, 10), 1e-4);
    }
    {
        const auto loss = [&]() {
            Rng r = substream(cfg.seed, "fd-vanilla");
            return loss_vanilla(pair.student, d, idx, tokens, s, r).loss;
        };
        Rng r = substream(cfg.seed, "fd-vanilla");
        const BatchLoss b = loss_vanilla(pair.student, d, idx, tokens, s, r);
        report("loss_vanilla", fd_max_rel_err(pair.student.params, b.grad, loss, rng, 10), 1e-4);
    }
    {
        const auto loss = [&]() {
            Rng r = substream(cfg.seed, "fd-weighted");
            return loss_weighted_dsm(pair, d, idx, s, weights, r).loss;
        };
        Rng r = substream(cfg.seed, "fd-weighted");
        const BatchLoss b = loss_weighted_dsm(pair, d, idx, s, weights, r);
        report("loss_weighted_dsm", fd_max_rel_err(pair.student.params, b.grad, loss, rng, 10), 1e-4);
    }
    {
        // classification losses: fixed draws, stop-gradient targets held fixed
        Rng r = substream(cfg.seed, "fd-cls");
        const DrawSet ds = make_plan_draws(weights.plan, s, netcfg.dim, r);
        const auto prior = uniform_prior(c);
        ClsEval teacher_eval;
        classifier_logits_eval(pair.teacher, c, d.point(1), s, ds, false, teacher_eval);
        const auto f_t = posterior_from_logits(teacher_eval.logits, prior);

        const auto student_probs = [&]() {
            ClsEval e;
            classifier_logits_eval(pair.student, c, d.point(1), s, ds, false, e);
            return posterior_from_logits(e.logits, prior);
        };
        ClsEval student_eval;
        classifier_logits_eval(pair.student, c, d.point(1), s, ds, true, student_eval);
        const auto f_s = posterior_from_logits(student_eval.logits, prior);

        const Supervision z_cand = Supervision::make_candidate((1ull << d.y_true[1]) | 1ull);
        const std::vector<std::pair<std::string, std::vector<double>>> targets = {
            {"loss_cls_pl", pl_target(f_t, z_cand)},
            {"loss_cls_su", su_target(f_t, Supervision::make_exact(d.y_true[1]))},
            {"loss_cls_nl", elr_target(f_s, f_t, d.z[1].label, cfg.train.elr_lambda)},
        };
        for (const auto& [name, target] : targets) {
            const auto loss = [&]() { return cross_entropy_loss(target, student_probs()); };
            std::vector<double> grad(pair.student.param_count(), 0.0);
            const auto dlogits = cross_entropy_logit_grad(target, f_s);
            classifier_logits_backward(pair.student, s, student_eval, dlogits, grad);
            report(name, fd_max_rel_err(pair.student.params, grad, loss, rng, 10), 1e-4);
        }
    }

    out << csv;
    if (!cfg.out.empty()) {
        require_out(cfg, "verify-gradients");
        write_text(fs::path(cfg.out) / "gradients.csv", csv);
        write_stamps(cfg, "verify-gradients");
    }
    return ok ? 0 : 4;
}

int dispatch(const Args& a, const ExperimentConfig& cfg, std::ostream& out) {
    if (a.sub == "make-data") return run_make_data(cfg, out);
    if (a.sub == "corrupt-labels") return run_corrupt_labels(cfg, out);
    if (a.sub == "train") return run_train(cfg, out);
    if (a.sub == "classify") return run_classify(cfg, out);
    if (a.sub == "plan-timesteps") return run_plan_timesteps(cfg, a, out);
    if (a.sub == "sample") return run_sample(cfg, out);
    if (a.sub == "eval") return run_eval(cfg, out);
    if (a.sub == "condense") return run_condense(cfg, a, out);
    if (a.sub == "verify-theorem1") return run_verify_theorem1(cfg, out);
    if (a.sub == "verify-gradients") return run_verify_gradients(cfg, out);
    throw std::invalid_argument("unknown subcommand \"" + a.sub + "\"");
}

std::string error_record(const char* type, const std::string& message) {
    nlohmann::json j = {{"error", {{"type", type}, {"message", message}}}};
    return j.dump() + "\n";
}

} // namespace

RunResult run(const std::vector<std::string>& args) {
    RunResult r;
    std::ostringstream out;
    try {
        const Args a = parse_args(args);
        const ExperimentConfig cfg = resolve_config(a);
        r.code = dispatch(a, cfg, out);
        if (r.code == 4) r.err = error_record("acceptance", a.sub + " check failed");
    } catch (const numerical_error& e) {
        r.code = 3;
        r.err = error_record("numerical", e.what());
    } catch (const std::exception& e) {
        r.code = 2;
        r.err = error_record("validation", e.what());
    }
    r.out = out.str();
    return r;
}

std::string usage_text() {
    return "usage: wsdiff SUBCOMMAND [flags]\n"
           "\n"
           "subcommands:\n"
           "  make-data        draw a clean dataset from the configured mixture\n"
           "  corrupt-labels   apply the configured label corruption\n"
           "  train            train the score model (vanilla or weighted)\n"
           "  classify         run the diffusion classifier on fresh eval data\n"
           "  plan-timesteps   solve the ELBO timestep subinterval (--delta X)\n"
           "  sample           generate points with the probability-flow sampler\n"
           "  eval             score generated samples against the mixture\n"
           "  condense         distill the model into centroids (--ipc N)\n"
           "  verify-theorem1  check the pooled-score identity on the oracle\n"
           "  verify-gradients finite-difference check of every loss gradient\n"
           "\n"
           "flags:\n"
           "  --config PATH    JSON config (defaults embedded)\n"
           "  --seed N         master seed override\n"
           "  --out DIR        artifact directory\n"
           "  --set KEY=VALUE  dotted config override, repeatable\n"
           "\n"
           "exit codes: 0 ok, 2 validation, 3 numerical, 4 verification failure\n";
}

int run_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        std::cout << usage_text();
        return args.empty() ? 2 : 0;
    }
    const RunResult r = run(args);
    std::cout << r.out;
    if (!r.err.empty()) std::cerr << r.err;
    return r.code;
}

} // namespace wsdiff
