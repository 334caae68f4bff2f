#include "wsdiff/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace wsdiff {

namespace {

void check_prob_vector(std::span<const double> p, const char* what) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative entry");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(what) + ": entries must sum to 1");
}

} // namespace

int Supervision::set_size() const { return std::popcount(cset); }

std::vector<int> Supervision::set_members() const {
    std::vector<int> out;
    for (int y = 0; y < 64; ++y)
        if (in_set(y)) out.push_back(y);
    return out;
}

void MixtureSpec::validate() const {
    if (dim < 1) throw std::invalid_argument("MixtureSpec: dim must be >= 1");
    if (classes.empty()) throw std::invalid_argument("MixtureSpec: no classes");
    if (classes.size() > 64) throw std::invalid_argument("MixtureSpec: more than 64 classes");
    if (prior.size() != classes.size())
        throw std::invalid_argument("MixtureSpec: prior size != class count");
    check_prob_vector(prior, "MixtureSpec prior");
    for (const auto& cls : classes) {
        if (cls.components.empty()) throw std::invalid_argument("MixtureSpec: class with no components");
        if (cls.weights.size() != cls.components.size())
            throw std::invalid_argument("MixtureSpec: component weight count mismatch");
        check_prob_vector(cls.weights, "MixtureSpec component weights");
        for (const auto& comp : cls.components) {
            if (static_cast<int>(comp.mean.size()) != dim)
                throw std::invalid_argument("MixtureSpec: mean dimension mismatch");
            if (comp.cov.rows != dim || comp.cov.cols != dim)
                throw std::invalid_argument("MixtureSpec: covariance shape mismatch");
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < i; ++j)
                    if (std::fabs(comp.cov.at(i, j) - comp.cov.at(j, i)) > 1e-12)
                        throw std::invalid_argument("MixtureSpec: covariance not symmetric");
            cholesky(comp.cov); // SPD check
        }
    }
}

void TransitionMatrix::validate() const {
    if (c < 2) throw std::invalid_argument("TransitionMatrix: need at least 2 classes");
    if (p.size() != static_cast<size_t>(c) * c)
        throw std::invalid_argument("TransitionMatrix: shape mismatch");
    for (int i = 0; i < c; ++i) {
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            if (!(at(i, j) >= 0.0)) throw std::invalid_argument("TransitionMatrix: negative entry");
            sum += at(i, j);
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("TransitionMatrix: row does not sum to 1");
    }
}

TransitionMatrix TransitionMatrix::symmetric(int c, double rate) {
    if (c < 2) throw std::invalid_argument("TransitionMatrix::symmetric: need c >= 2");
    if (!(rate >= 0.0 && rate < 1.0))
        throw std::invalid_argument("TransitionMatrix::symmetric: rate must lie in [0,1)");
    TransitionMatrix t;
    t.c = c;
    t.p.assign(static_cast<size_t>(c) * c, rate / (c - 1));
    for (int i = 0; i < c; ++i) t.at(i, i) = 1.0 - rate;
    return t;
}

TransitionMatrix TransitionMatrix::asymmetric(int c, double rate,
                                              const std::vector<std::pair<int, int>>& pairs) {
    if (c < 2) throw std::invalid_argument("TransitionMatrix::asymmetric: need c >= 2");
    if (!(rate >= 0.0 && rate < 1.0))
        throw std::invalid_argument("TransitionMatrix::asymmetric: rate must lie in [0,1)");
    TransitionMatrix t;
    t.c = c;
    t.p.assign(static_cast<size_t>(c) * c, 0.0);
    for (int i = 0; i < c; ++i) t.at(i, i) = 1.0;
    auto flip = [&](int from, int to) {
        if (from < 0 || from >= c || to < 0 || to >= c || from == to)
            throw std::invalid_argument("TransitionMatrix::asymmetric: bad class pair");
        t.at(from, from) = 1.0 - rate;
        t.at(from, to) = rate;
    };
    if (pairs.empty()) {
        for (int i = 0; i < c; ++i) flip(i, (i + 1) % c);
    } else {
        for (auto [from, to] : pairs) flip(from, to);
    }
    return t;
}

Dataset sample_dataset(const MixtureSpec& spec, int n, Rng& rng) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
    const int d = spec.dim;
    const int c = spec.num_classes();

    std::vector<std::vector<Matrix>> chols(c);
    for (int y = 0; y < c; ++y)
        for (const auto& comp : spec.classes[y].components) chols[y].push_back(cholesky(comp.cov));

    Dataset out;
    out.dim = d;
    out.num_classes = c;
    out.x.resize(static_cast<size_t>(n) * d);
    out.y_true.resize(n);
    out.z.resize(n);

    std::discrete_distribution<int> class_dist(spec.prior.begin(), spec.prior.end());
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> xi(d);
    for (int i = 0; i < n; ++i) {
        const int y = class_dist(rng);
        const auto& cls = spec.classes[y];
        std::discrete_distribution<int> comp_dist(cls.weights.begin(), cls.weights.end());
        const int k = comp_dist(rng);
        for (int j = 0; j < d; ++j) xi[j] = gauss(rng);
        const auto& l = chols[y][k];
        double* row = out.x.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            double v = cls.components[k].mean[j];
            for (int m = 0; m <= j; ++m) v += l.at(j, m) * xi[m];
            row[j] = v;
        }
        out.y_true[i] = y;
        out.z[i] = Supervision::make_exact(y);
    }
    return out;
}

Dataset corrupt_noisy(const Dataset& d, const TransitionMatrix& t, Rng& rng) {
    t.validate();
    if (t.c != d.num_classes) throw std::invalid_argument("corrupt_noisy: class count mismatch");
    Dataset out = d;
    for (int i = 0; i < d.size(); ++i) {
        const int y = d.y_true[i];
        std::discrete_distribution<int> row(t.p.begin() + static_cast<size_t>(y) * t.c,
                                            t.p.begin() + static_cast<size_t>(y + 1) * t.c);
        out.z[i] = Supervision::make_noisy(row(rng));
    }
    return out;
}

Matrix candidate_inclusion_matrix(PartialMode mode, int c, double q) {
    if (c < 2) throw std::invalid_argument("candidate_inclusion_matrix: need c >= 2");
    Matrix m(c, c);
    for (int i = 0; i < c; ++i) m.at(i, i) = 1.0;
    if (mode == PartialMode::random) {
        if (!(q >= 0.0 && q <= 1.0))
            throw std::invalid_argument("candidate_inclusion_matrix: q must lie in [0,1]");
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j)
                if (i != j) m.at(i, j) = q;
        return m;
    }
    // class_dependent: wrong-label probability cycles with the offset from
    // the diagonal: q+0.2, q, q-0.2, q+0.2, ...
    if (c < 4)
        throw std::invalid_argument("candidate_inclusion_matrix: class_dependent requires c >= 4");
    if (!(q - 0.2 >= 0.0 && q + 0.2 <= 1.0))
        throw std::invalid_argument("candidate_inclusion_matrix: class_dependent requires q in [0.2, 0.8]");
    const double cycle[3] = {q + 0.2, q, q - 0.2};
    for (int i = 0; i < c; ++i)
        for (int off = 1; off < c; ++off) m.at(i, (i + off) % c) = cycle[(off - 1) % 3];
    return m;
}

Dataset corrupt_partial(const Dataset& d, PartialMode mode, double q, Rng& rng) {
    const Matrix incl = candidate_inclusion_matrix(mode, d.num_classes, q);
    Dataset out = d;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < d.size(); ++i) {
        const int y = d.y_true[i];
        std::uint64_t cset = 1ull << y;
        for (int j = 0; j < d.num_classes; ++j) {
            if (j == y) continue;
            if (u(rng) < incl.at(y, j)) cset |= 1ull << j;
        }
        out.z[i] = Supervision::make_candidate(cset);
    }
    return out;
}

Dataset corrupt_semi(const Dataset& d, double labeled_fraction, Rng& rng) {
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
        throw std::invalid_argument("corrupt_semi: labeled_fraction must lie in (0,1]");
    Dataset out = d;
    std::vector<std::vector<int>> by_class(d.num_classes);
    for (int i = 0; i < d.size(); ++i) by_class[d.y_true[i]].push_back(i);
    for (auto& idx : by_class) {
        if (idx.empty()) continue;
        const int keep = std::max<int>(1, static_cast<int>(std::lround(labeled_fraction * idx.size())));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t k = 0; k < idx.size(); ++k) {
            const int i = idx[k];
            out.z[i] = (static_cast<int>(k) < keep) ? Supervision::make_exact(d.y_true[i])
                                                    : Supervision::make_unlabeled();
        }
    }
    return out;
}

std::string format_double(double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<size_t>(n));
}

void write_dataset_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_dataset_csv: cannot open " + path.string());
    for (int j = 0; j < d.dim; ++j) f << 'x' << j << ',';
    f << "y_true,z_kind,z_payload\n";
    for (int i = 0; i < d.size(); ++i) {
        const double* row = d.x.data() + static_cast<size_t>(i) * d.dim;
        for (int j = 0; j < d.dim; ++j) f << format_double(row[j]) << ',';
        f << d.y_true[i] << ',';
        const auto& z = d.z[i];
        switch (z.kind) {
        case Supervision::Kind::exact:
            f << "exact," << z.label;
            break;
        case Supervision::Kind::noisy:
            f << "noisy," << z.label;
            break;
        case Supervision::Kind::unlabeled:
            f << "unlabeled,";
            break;
        case Supervision::Kind::candidate: {
            f << "candidate,";
            bool first = true;
            for (int y : z.set_members()) {
                if (!first) f << '|';
                f << y;
                first = false;
            }
            break;
        }
        }
        f << '\n';
    }
    if (!f) throw std::runtime_error("write_dataset_csv: write failed for " + path.string());
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
    double v;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("read_dataset_csv: bad number '" + s + "' in " + path.string());
    return v;
}

int parse_int(const std::string& s, const std::filesystem::path& path) {
    int v;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("read_dataset_csv: bad integer '" + s + "' in " + path.string());
    return v;
}

} // namespace

Dataset read_dataset_csv(const std::filesystem::path& path, int num_classes) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_dataset_csv: cannot open " + path.string());
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("read_dataset_csv: empty file");
    const auto cols = split(header, ',');
    if (cols.size() < 4 || cols[cols.size() - 3] != "y_true" || cols[cols.size() - 2] != "z_kind" ||
        cols.back() != "z_payload")
        throw std::runtime_error("read_dataset_csv: unexpected header in " + path.string());
    const int dim = static_cast<int>(cols.size()) - 3;

    Dataset d;
    d.dim = dim;
    d.num_classes = num_classes;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto parts = split(line, ',');
        if (parts.size() != cols.size())
            throw std::runtime_error("read_dataset_csv: ragged row in " + path.string());
        for (int j = 0; j < dim; ++j) d.x.push_back(parse_double(parts[j], path));
        const int y = parse_int(parts[dim], path);
        if (y < 0 || y >= num_classes) throw std::runtime_error("read_dataset_csv: label out of range");
        d.y_true.push_back(y);
        const std::string& kind = parts[dim + 1];
        const std::string& payload = parts[dim + 2];
        if (kind == "exact") {
            d.z.push_back(Supervision::make_exact(parse_int(payload, path)));
        } else if (kind == "noisy") {
            d.z.push_back(Supervision::make_noisy(parse_int(payload, path)));
        } else if (kind == "unlabeled") {
            d.z.push_back(Supervision::make_unlabeled());
        } else if (kind == "candidate") {
            std::uint64_t cset = 0;
            for (const auto& tok : split(payload, '|')) {
                const int y2 = parse_int(tok, path);
                if (y2 < 0 || y2 >= num_classes)
                    throw std::runtime_error("read_dataset_csv: candidate label out of range");
                cset |= 1ull << y2;
            }
            if (cset == 0) throw std::runtime_error("read_dataset_csv: empty candidate set");
            d.z.push_back(Supervision::make_candidate(cset));
        } else {
            throw std::runtime_error("read_dataset_csv: unknown z_kind '" + kind + "'");
        }
    }
    return d;
}

} // namespace wsdiff
