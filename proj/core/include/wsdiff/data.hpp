#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsdiff/linalg.hpp"
#include "wsdiff/rng.hpp"

namespace wsdiff {

struct Component {
    std::vector<double> mean; // d
    Matrix cov;               // d x d, SPD
};

struct ClassMixture {
    std::vector<double> weights; // sums to 1
    std::vector<Component> components;
};

// Ground-truth generating process: class prior + per-class Gaussian mixture.
struct MixtureSpec {
    int dim = 0;
    std::vector<double> prior;
    std::vector<ClassMixture> classes;

    int num_classes() const { return static_cast<int>(classes.size()); }
    void validate() const; // throws std::invalid_argument
};

// Per-sample label information. Candidate sets are stored as bitmasks,
// which caps the class count at 64; validate() enforces that.
struct Supervision {
    enum class Kind { exact, candidate, unlabeled, noisy };
    Kind kind = Kind::exact;
    int label = -1;     // exact / noisy
    std::uint64_t cset = 0; // candidate

    static Supervision make_exact(int y) { return {Kind::exact, y, 0}; }
    static Supervision make_noisy(int y) { return {Kind::noisy, y, 0}; }
    static Supervision make_unlabeled() { return {Kind::unlabeled, -1, 0}; }
    static Supervision make_candidate(std::uint64_t cset) { return {Kind::candidate, -1, cset}; }

    bool in_set(int y) const { return (cset >> y) & 1u; }
    int set_size() const;
    std::vector<int> set_members() const;
};

// Row-stochastic label transition matrix: p[i*c+j] = P(observed j | true i).
struct TransitionMatrix {
    int c = 0;
    std::vector<double> p;

    double at(int i, int j) const { return p[static_cast<size_t>(i) * c + j]; }
    double& at(int i, int j) { return p[static_cast<size_t>(i) * c + j]; }
    void validate() const;

    static TransitionMatrix symmetric(int c, double rate);
    // pairs[i] = target class for source i; identity elsewhere. Default
    // pairing sends every class to its cyclic successor.
    static TransitionMatrix asymmetric(int c, double rate,
                                       const std::vector<std::pair<int, int>>& pairs = {});
};

struct Dataset {
    int dim = 0;
    int num_classes = 0;
    std::vector<double> x; // n * dim, row-major
    std::vector<int> y_true;
    std::vector<Supervision> z;

    int size() const { return static_cast<int>(y_true.size()); }
    std::span<const double> point(int i) const {
        return {x.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
    }
};

Dataset sample_dataset(const MixtureSpec& spec, int n, Rng& rng);

// Label corruption. Inputs are taken by const reference and returned as new
// datasets; x and y_true are always preserved bit for bit.
Dataset corrupt_noisy(const Dataset& d, const TransitionMatrix& t, Rng& rng);

enum class PartialMode { random, class_dependent };

// Candidate inclusion probabilities: diag 1; off-diagonal q for random mode,
// the circulant {q+0.2, q, q-0.2} pattern (cycling with distance from the
// diagonal) for class_dependent.
Matrix candidate_inclusion_matrix(PartialMode mode, int c, double q);

Dataset corrupt_partial(const Dataset& d, PartialMode mode, double q, Rng& rng);

// Keeps round(fraction * n_class) labels per class (at least one), strips the rest.
Dataset corrupt_semi(const Dataset& d, double labeled_fraction, Rng& rng);

void write_dataset_csv(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, int num_classes);

// Serializes a double so that parsing recovers the identical bit pattern.
std::string format_double(double v);

} // namespace wsdiff
