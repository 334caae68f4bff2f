#include "wsdiff/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wsdiff {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

void expect_keys(const json& j, const char* where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) fail(std::string(where) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) fail("unknown key \"" + it.key() + "\" in " + where);
    }
}

double as_num(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where + " must be a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where + " must be an integer");
    return j.get<int>();
}

bool as_bool(const json& j, const std::string& where) {
    if (!j.is_boolean()) fail(where + " must be a boolean");
    return j.get<bool>();
}

std::string as_str(const json& j, const std::string& where) {
    if (!j.is_string()) fail(where + " must be a string");
    return j.get<std::string>();
}

std::vector<double> as_vec(const json& j, const std::string& where) {
    if (!j.is_array()) fail(where + " must be an array");
    std::vector<double> v;
    v.reserve(j.size());
    for (size_t i = 0; i < j.size(); ++i) v.push_back(as_num(j[i], where + " entry"));
    return v;
}

Matrix as_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) fail(where + " must be a nonempty array of rows");
    const int rows = static_cast<int>(j.size());
    const auto first = as_vec(j[0], where + " row");
    Matrix m(rows, static_cast<int>(first.size()));
    for (int i = 0; i < rows; ++i) {
        const auto row = as_vec(j[i], where + " row");
        if (static_cast<int>(row.size()) != m.cols) fail(where + " rows differ in length");
        for (int k = 0; k < m.cols; ++k) m.at(i, k) = row[k];
    }
    return m;
}

const char* to_string(CorruptionMode m) {
    switch (m) {
        case CorruptionMode::none: return "none";
        case CorruptionMode::noisy_symmetric: return "noisy_symmetric";
        case CorruptionMode::noisy_asymmetric: return "noisy_asymmetric";
        case CorruptionMode::partial_random: return "partial_random";
        case CorruptionMode::partial_class_dependent: return "partial_class_dependent";
        case CorruptionMode::semi: return "semi";
    }
    fail("bad corruption mode");
}

CorruptionMode corruption_mode_from(const std::string& s) {
    if (s == "none") return CorruptionMode::none;
    if (s == "noisy_symmetric") return CorruptionMode::noisy_symmetric;
    if (s == "noisy_asymmetric") return CorruptionMode::noisy_asymmetric;
    if (s == "partial_random") return CorruptionMode::partial_random;
    if (s == "partial_class_dependent") return CorruptionMode::partial_class_dependent;
    if (s == "semi") return CorruptionMode::semi;
    fail("unknown corruption mode \"" + s + "\"");
}

const char* to_string(PriorMode m) {
    switch (m) {
        case PriorMode::uniform: return "uniform";
        case PriorMode::true_prior: return "true";
        case PriorMode::estimate: return "estimate";
    }
    fail("bad prior mode");
}

PriorMode prior_mode_from(const std::string& s) {
    if (s == "uniform") return PriorMode::uniform;
    if (s == "true") return PriorMode::true_prior;
    if (s == "estimate") return PriorMode::estimate;
    fail("unknown prior mode \"" + s + "\"");
}

const char* to_string(TrainMethod m) {
    return m == TrainMethod::vanilla ? "vanilla" : "weighted";
}

TrainMethod train_method_from(const std::string& s) {
    if (s == "vanilla") return TrainMethod::vanilla;
    if (s == "weighted") return TrainMethod::weighted;
    fail("unknown train method \"" + s + "\"");
}

json mixture_to_json(const MixtureSpec& m) {
    json classes = json::array();
    for (const auto& cm : m.classes) {
        json comps = json::array();
        for (const auto& comp : cm.components) {
            json cov = json::array();
            for (int i = 0; i < comp.cov.rows; ++i) {
                json row = json::array();
                for (int k = 0; k < comp.cov.cols; ++k) row.push_back(comp.cov.at(i, k));
                cov.push_back(row);
            }
            comps.push_back({{"mean", comp.mean}, {"cov", cov}});
        }
        classes.push_back({{"weights", cm.weights}, {"components", comps}});
    }
    return {{"dim", m.dim}, {"prior", m.prior}, {"classes", classes}};
}

MixtureSpec mixture_from_json(const json& j) {
    expect_keys(j, "mixture", {"dim", "prior", "classes"});
    if (!j.contains("dim") || !j.contains("prior") || !j.contains("classes"))
        fail("mixture requires dim, prior and classes");
    MixtureSpec m;
    m.dim = as_int(j["dim"], "mixture.dim");
    m.prior = as_vec(j["prior"], "mixture.prior");
    if (!j["classes"].is_array()) fail("mixture.classes must be an array");
    for (const auto& jc : j["classes"]) {
        expect_keys(jc, "mixture class", {"weights", "components"});
        if (!jc.contains("weights") || !jc.contains("components"))
            fail("mixture class requires weights and components");
        ClassMixture cm;
        cm.weights = as_vec(jc["weights"], "class weights");
        if (!jc["components"].is_array()) fail("class components must be an array");
        for (const auto& jk : jc["components"]) {
            expect_keys(jk, "mixture component", {"mean", "cov"});
            if (!jk.contains("mean") || !jk.contains("cov"))
                fail("mixture component requires mean and cov");
            Component comp;
            comp.mean = as_vec(jk["mean"], "component mean");
            comp.cov = as_matrix(jk["cov"], "component cov");
            cm.components.push_back(std::move(comp));
        }
        m.classes.push_back(std::move(cm));
    }
    return m;
}

json schedule_to_json(const Schedule& s) {
    json params;
    switch (s.kind) {
        case ScheduleKind::edm:
            params = {{"sigma_min", s.sigma_min},
                      {"sigma_max", s.sigma_max},
                      {"p_mean", s.p_mean},
                      {"p_std", s.p_std}};
            return {{"kind", "edm"}, {"sigma_data", s.sigma_data}, {"params", params}};
        case ScheduleKind::ddpm_discrete:
            params = {{"betas", s.betas}};
            return {{"kind", "ddpm_discrete"}, {"sigma_data", s.sigma_data}, {"params", params}};
        case ScheduleKind::ve:
            params = {{"sigma_min", s.sigma_min}, {"sigma_max", s.sigma_max}};
            return {{"kind", "ve"}, {"sigma_data", s.sigma_data}, {"params", params}};
        case ScheduleKind::vp:
            params = {{"beta_min", s.beta_min}, {"beta_max", s.beta_max}};
            return {{"kind", "vp"}, {"sigma_data", s.sigma_data}, {"params", params}};
    }
    fail("bad schedule kind");
}

Schedule schedule_from_json(const json& j) {
    expect_keys(j, "schedule", {"kind", "sigma_data", "params"});
    if (!j.contains("kind")) fail("schedule requires kind");
    const std::string kind = as_str(j["kind"], "schedule.kind");
    const double sigma_data =
        j.contains("sigma_data") ? as_num(j["sigma_data"], "schedule.sigma_data") : 0.5;
    const json params = j.contains("params") ? j["params"] : json::object();

    if (kind == "edm") {
        expect_keys(params, "schedule.params", {"sigma_min", "sigma_max", "p_mean", "p_std"});
        Schedule base = Schedule::edm();
        return Schedule::edm(
            params.contains("sigma_min") ? as_num(params["sigma_min"], "sigma_min") : base.sigma_min,
            params.contains("sigma_max") ? as_num(params["sigma_max"], "sigma_max") : base.sigma_max,
            params.contains("p_mean") ? as_num(params["p_mean"], "p_mean") : base.p_mean,
            params.contains("p_std") ? as_num(params["p_std"], "p_std") : base.p_std, sigma_data);
    }
    if (kind == "ddpm_discrete") {
        expect_keys(params, "schedule.params", {"betas", "steps", "beta_start", "beta_end"});
        if (params.contains("betas"))
            return Schedule::ddpm(as_vec(params["betas"], "betas"), sigma_data);
        const int steps = params.contains("steps") ? as_int(params["steps"], "steps") : 1000;
        const double b0 =
            params.contains("beta_start") ? as_num(params["beta_start"], "beta_start") : 1e-4;
        const double b1 = params.contains("beta_end") ? as_num(params["beta_end"], "beta_end") : 0.02;
        return Schedule::ddpm_linear(steps, b0, b1, sigma_data);
    }
    if (kind == "ve") {
        expect_keys(params, "schedule.params", {"sigma_min", "sigma_max"});
        Schedule base = Schedule::ve(0.002, 80.0);
        return Schedule::ve(
            params.contains("sigma_min") ? as_num(params["sigma_min"], "sigma_min") : base.sigma_min,
            params.contains("sigma_max") ? as_num(params["sigma_max"], "sigma_max") : base.sigma_max,
            sigma_data);
    }
    if (kind == "vp") {
        expect_keys(params, "schedule.params", {"beta_min", "beta_max"});
        Schedule base = Schedule::vp();
        return Schedule::vp(
            params.contains("beta_min") ? as_num(params["beta_min"], "beta_min") : base.beta_min,
            params.contains("beta_max") ? as_num(params["beta_max"], "beta_max") : base.beta_max,
            sigma_data);
    }
    fail("unknown schedule kind \"" + kind + "\"");
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["mixture"] = mixture_to_json(c.mixture);
    j["schedule"] = schedule_to_json(c.schedule);
    j["data"] = {{"n_train", c.data.n_train}, {"n_eval", c.data.n_eval}};

    json pairs = json::array();
    for (const auto& [a, b] : c.corruption.pairs) pairs.push_back(json::array({a, b}));
    j["corruption"] = {{"mode", to_string(c.corruption.mode)},
                       {"params",
                        {{"rate", c.corruption.rate},
                         {"q", c.corruption.q},
                         {"labeled_fraction", c.corruption.labeled_fraction},
                         {"pairs", pairs}}}};

    const TrainConfig& t = c.train;
    j["train"] = {{"method", to_string(t.method)},
                  {"batch_size", t.batch_size},
                  {"iterations", t.iterations},
                  {"lr", t.lr},
                  {"adam_beta1", t.adam_beta1},
                  {"adam_beta2", t.adam_beta2},
                  {"adam_eps", t.adam_eps},
                  {"ema_decay", t.ema_decay},
                  {"cls_weight", t.cls_weight},
                  {"elr_lambda", t.elr_lambda},
                  {"width", t.width},
                  {"depth", t.depth},
                  {"class_emb_dim", t.class_emb_dim},
                  {"noise_emb_pairs", t.noise_emb_pairs},
                  {"aux_slots", t.aux_slots},
                  {"posterior_draws", t.posterior_draws},
                  {"noisy_weight_transition", t.noisy_weight_transition},
                  {"oracle_weights", t.oracle_weights},
                  {"cls_input_clean", t.cls_input_clean},
                  {"eval_every", t.eval_every},
                  {"eval_points", t.eval_points},
                  {"prior", to_string(c.train_prior)}};

    j["classifier"] = {{"delta", c.classifier.delta},
                       {"draws", c.classifier.draws},
                       {"reuse_noise", c.classifier.reuse_noise},
                       {"estimate_start", c.classifier.estimate_start},
                       {"prior", to_string(c.classifier.prior)}};

    j["sampler"] = {{"steps", c.sampler.steps},
                    {"rho", c.sampler.rho},
                    {"n_per_class", c.sampler.n_per_class},
                    {"ipc", c.sampler.ipc}};
    return j;
}

// Copies the knobs that other blocks own into the train config.
void sync_derived(ExperimentConfig& c) {
    c.train.seed = c.seed;
    c.train.classifier_delta = c.classifier.delta;
    c.train.eval_draws = c.classifier.draws;
    c.train.reuse_noise = c.classifier.reuse_noise;
    c.train.estimate_start = c.classifier.estimate_start;
    c.train.class_prior =
        c.train_prior == PriorMode::true_prior ? c.mixture.prior : std::vector<double>{};
}

ExperimentConfig config_from_json(const json& j) {
    expect_keys(j, "config", {"seed", "out", "mixture", "schedule", "data", "corruption", "train",
                              "classifier", "sampler"});
    ExperimentConfig c = default_config();

    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            fail("seed must be a nonnegative integer");
        if (j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() < 0)
            fail("seed must be nonnegative");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("out")) c.out = as_str(j["out"], "out");
    if (j.contains("mixture")) c.mixture = mixture_from_json(j["mixture"]);
    if (j.contains("schedule")) c.schedule = schedule_from_json(j["schedule"]);

    if (j.contains("data")) {
        const json& jd = j["data"];
        expect_keys(jd, "data", {"n_train", "n_eval"});
        if (jd.contains("n_train")) c.data.n_train = as_int(jd["n_train"], "data.n_train");
        if (jd.contains("n_eval")) c.data.n_eval = as_int(jd["n_eval"], "data.n_eval");
    }

    if (j.contains("corruption")) {
        const json& jc = j["corruption"];
        expect_keys(jc, "corruption", {"mode", "params"});
        if (jc.contains("mode"))
            c.corruption.mode = corruption_mode_from(as_str(jc["mode"], "corruption.mode"));
        if (jc.contains("params")) {
            const json& jp = jc["params"];
            expect_keys(jp, "corruption.params", {"rate", "q", "labeled_fraction", "pairs"});
            if (jp.contains("rate")) c.corruption.rate = as_num(jp["rate"], "corruption rate");
            if (jp.contains("q")) c.corruption.q = as_num(jp["q"], "corruption q");
            if (jp.contains("labeled_fraction"))
                c.corruption.labeled_fraction = as_num(jp["labeled_fraction"], "labeled_fraction");
            if (jp.contains("pairs")) {
                if (!jp["pairs"].is_array()) fail("corruption pairs must be an array");
                c.corruption.pairs.clear();
                for (const auto& pr : jp["pairs"]) {
                    if (!pr.is_array() || pr.size() != 2) fail("corruption pair must be [src, dst]");
                    c.corruption.pairs.emplace_back(as_int(pr[0], "pair src"),
                                                    as_int(pr[1], "pair dst"));
                }
            }
        }
    }

    if (j.contains("train")) {
        const json& jt = j["train"];
        expect_keys(jt, "train",
                    {"method", "batch_size", "iterations", "lr", "adam_beta1", "adam_beta2",
                     "adam_eps", "ema_decay", "cls_weight", "elr_lambda", "width", "depth",
                     "class_emb_dim", "noise_emb_pairs", "aux_slots", "posterior_draws",
                     "noisy_weight_transition", "oracle_weights", "cls_input_clean", "eval_every",
                     "eval_points", "prior"});
        TrainConfig& t = c.train;
        if (jt.contains("method")) t.method = train_method_from(as_str(jt["method"], "train.method"));
        if (jt.contains("batch_size")) t.batch_size = as_int(jt["batch_size"], "batch_size");
        if (jt.contains("iterations")) t.iterations = as_int(jt["iterations"], "iterations");
        if (jt.contains("lr")) t.lr = as_num(jt["lr"], "lr");
        if (jt.contains("adam_beta1")) t.adam_beta1 = as_num(jt["adam_beta1"], "adam_beta1");
        if (jt.contains("adam_beta2")) t.adam_beta2 = as_num(jt["adam_beta2"], "adam_beta2");
        if (jt.contains("adam_eps")) t.adam_eps = as_num(jt["adam_eps"], "adam_eps");
        if (jt.contains("ema_decay")) t.ema_decay = as_num(jt["ema_decay"], "ema_decay");
        if (jt.contains("cls_weight")) t.cls_weight = as_num(jt["cls_weight"], "cls_weight");
        if (jt.contains("elr_lambda")) t.elr_lambda = as_num(jt["elr_lambda"], "elr_lambda");
        if (jt.contains("width")) t.width = as_int(jt["width"], "width");
        if (jt.contains("depth")) t.depth = as_int(jt["depth"], "depth");
        if (jt.contains("class_emb_dim")) t.class_emb_dim = as_int(jt["class_emb_dim"], "class_emb_dim");
        if (jt.contains("noise_emb_pairs"))
            t.noise_emb_pairs = as_int(jt["noise_emb_pairs"], "noise_emb_pairs");
        if (jt.contains("aux_slots")) t.aux_slots = as_int(jt["aux_slots"], "aux_slots");
        if (jt.contains("posterior_draws"))
            t.posterior_draws = as_int(jt["posterior_draws"], "posterior_draws");
        if (jt.contains("noisy_weight_transition"))
            t.noisy_weight_transition = as_bool(jt["noisy_weight_transition"], "noisy_weight_transition");
        if (jt.contains("oracle_weights"))
            t.oracle_weights = as_bool(jt["oracle_weights"], "oracle_weights");
        if (jt.contains("cls_input_clean"))
            t.cls_input_clean = as_bool(jt["cls_input_clean"], "cls_input_clean");
        if (jt.contains("eval_every")) t.eval_every = as_int(jt["eval_every"], "eval_every");
        if (jt.contains("eval_points")) t.eval_points = as_int(jt["eval_points"], "eval_points");
        if (jt.contains("prior")) c.train_prior = prior_mode_from(as_str(jt["prior"], "train.prior"));
    }

    if (j.contains("classifier")) {
        const json& jc = j["classifier"];
        expect_keys(jc, "classifier", {"delta", "draws", "reuse_noise", "estimate_start", "prior"});
        if (jc.contains("delta")) c.classifier.delta = as_num(jc["delta"], "classifier.delta");
        if (jc.contains("draws")) c.classifier.draws = as_int(jc["draws"], "classifier.draws");
        if (jc.contains("reuse_noise"))
            c.classifier.reuse_noise = as_bool(jc["reuse_noise"], "reuse_noise");
        if (jc.contains("estimate_start"))
            c.classifier.estimate_start = as_bool(jc["estimate_start"], "estimate_start");
        if (jc.contains("prior"))
            c.classifier.prior = prior_mode_from(as_str(jc["prior"], "classifier.prior"));
    }

    if (j.contains("sampler")) {
        const json& js = j["sampler"];
        expect_keys(js, "sampler", {"steps", "rho", "n_per_class", "ipc"});
        if (js.contains("steps")) c.sampler.steps = as_int(js["steps"], "sampler.steps");
        if (js.contains("rho")) c.sampler.rho = as_num(js["rho"], "sampler.rho");
        if (js.contains("n_per_class")) c.sampler.n_per_class = as_int(js["n_per_class"], "n_per_class");
        if (js.contains("ipc")) c.sampler.ipc = as_int(js["ipc"], "sampler.ipc");
    }

    sync_derived(c);
    c.validate();
    return c;
}

} // namespace

void ExperimentConfig::validate() const {
    mixture.validate();
    if (!(schedule.sigma_data > 0.0)) fail("sigma_data must be positive");
    if (data.n_train < 1) fail("data.n_train must be >= 1");
    if (data.n_eval < 2) fail("data.n_eval must be >= 2");

    const int c = mixture.num_classes();
    switch (corruption.mode) {
        case CorruptionMode::none:
            break;
        case CorruptionMode::noisy_symmetric:
        case CorruptionMode::noisy_asymmetric:
            if (!(corruption.rate >= 0.0 && corruption.rate <= 1.0))
                fail("corruption rate must lie in [0,1]");
            for (const auto& [a, b] : corruption.pairs)
                if (a < 0 || a >= c || b < 0 || b >= c) fail("corruption pair out of class range");
            break;
        case CorruptionMode::partial_random:
            if (!(corruption.q > 0.0 && corruption.q < 1.0))
                fail("corruption q must lie in (0,1)");
            break;
        case CorruptionMode::partial_class_dependent:
            if (c < 4) fail("class-dependent partial labels need at least 4 classes");
            if (!(corruption.q >= 0.2 && corruption.q <= 0.8))
                fail("class-dependent q must lie in [0.2, 0.8]");
            break;
        case CorruptionMode::semi:
            if (!(corruption.labeled_fraction > 0.0 && corruption.labeled_fraction <= 1.0))
                fail("labeled_fraction must lie in (0,1]");
            break;
    }

    const TrainConfig& t = train;
    if (t.batch_size < 1 || t.iterations < 1) fail("train sizes must be positive");
    if (!(t.lr > 0.0)) fail("lr must be positive");
    if (!(t.adam_beta1 >= 0.0 && t.adam_beta1 < 1.0) || !(t.adam_beta2 >= 0.0 && t.adam_beta2 < 1.0))
        fail("adam betas must lie in [0,1)");
    if (!(t.adam_eps > 0.0)) fail("adam_eps must be positive");
    if (!(t.ema_decay >= 0.0 && t.ema_decay < 1.0)) fail("ema_decay must lie in [0,1)");
    if (!(t.cls_weight >= 0.0)) fail("cls_weight must be >= 0");
    if (!(t.elr_lambda >= 0.0)) fail("elr_lambda must be >= 0");
    if (t.width < 1 || t.depth < 1) fail("net sizes must be positive");
    if (t.class_emb_dim < 1 || t.noise_emb_pairs < 1 || t.aux_slots < 1)
        fail("embedding sizes must be positive");
    if (t.posterior_draws < 1) fail("posterior_draws must be >= 1");
    if (t.eval_every < 1 || t.eval_points < 1) fail("eval settings must be positive");
    if (train_prior == PriorMode::estimate)
        fail("train.prior=estimate is not supported; estimation runs in classify");

    if (!(classifier.delta >= 0.0)) fail("classifier.delta must be >= 0");
    if (classifier.draws < 1) fail("classifier.draws must be >= 1");

    if (sampler.steps < 2) fail("sampler.steps must be >= 2");
    if (!(sampler.rho > 0.0)) fail("sampler.rho must be positive");
    if (sampler.n_per_class < 2) fail("sampler.n_per_class must be >= 2");
    if (sampler.ipc < 1) fail("sampler.ipc must be >= 1");
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    c.mixture.dim = 2;
    c.mixture.prior = {0.5, 0.5};
    Matrix cov(2, 2);
    cov.at(0, 0) = cov.at(1, 1) = 0.25;
    c.mixture.classes = {ClassMixture{{1.0}, {Component{{-1.0, 0.0}, cov}}},
                         ClassMixture{{1.0}, {Component{{1.0, 0.0}, cov}}}};
    c.schedule = Schedule::edm();
    sync_derived(c);
    return c;
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    return config_to_json(cfg).dump(2) + "\n";
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        fail("override must look like key.path=value, got \"" + assignment + "\"");
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json tree = config_to_json(cfg);
    json* node = &tree;
    size_t start = 0;
    std::vector<std::string> segs;
    while (start <= path.size()) {
        const auto dot = path.find('.', start);
        segs.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (size_t i = 0; i + 1 < segs.size(); ++i) {
        const std::string& s = segs[i];
        if (s.empty()) fail("empty path segment in override \"" + path + "\"");
        if (node->is_array()) {
            size_t idx = 0;
            try {
                idx = std::stoul(s);
            } catch (...) {
                fail("array index expected in override path \"" + path + "\"");
            }
            if (idx >= node->size()) fail("array index out of range in override \"" + path + "\"");
            node = &(*node)[idx];
        } else {
            node = &(*node)[s];
        }
    }
    json parsed;
    if (json::accept(value)) {
        parsed = json::parse(value);
    } else {
        parsed = value; // bare string, e.g. corruption.mode=semi
    }
    if (node->is_array()) {
        size_t idx = 0;
        try {
            idx = std::stoul(segs.back());
        } catch (...) {
            fail("array index expected in override path \"" + path + "\"");
        }
        if (idx >= node->size()) fail("array index out of range in override \"" + path + "\"");
        (*node)[idx] = parsed;
    } else {
        (*node)[segs.back()] = parsed;
    }
    cfg = config_from_json(tree);
}

TransitionMatrix corruption_transition(const CorruptionBlock& cb, int c) {
    switch (cb.mode) {
        case CorruptionMode::noisy_symmetric:
            return TransitionMatrix::symmetric(c, cb.rate);
        case CorruptionMode::noisy_asymmetric:
            return TransitionMatrix::asymmetric(c, cb.rate, cb.pairs);
        default:
            throw std::invalid_argument("corruption_transition: mode carries no transition matrix");
    }
}

} // namespace wsdiff
