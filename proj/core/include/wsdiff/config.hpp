#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wsdiff/data.hpp"
#include "wsdiff/objectives.hpp"
#include "wsdiff/schedule.hpp"

namespace wsdiff {

enum class PriorMode { uniform, true_prior, estimate };

enum class CorruptionMode {
    none,
    noisy_symmetric,
    noisy_asymmetric,
    partial_random,
    partial_class_dependent,
    semi
};

struct DataBlock {
    int n_train = 4096;
    int n_eval = 2048;
};

struct CorruptionBlock {
    CorruptionMode mode = CorruptionMode::none;
    double rate = 0.4;             // noisy flip rate
    double q = 0.5;                // candidate inclusion probability
    double labeled_fraction = 0.1; // semi
    std::vector<std::pair<int, int>> pairs; // asymmetric; empty = cyclic successor
};

struct ClassifierBlock {
    double delta = 6.4;
    int draws = 16;
    bool reuse_noise = true;
    bool estimate_start = false;
    PriorMode prior = PriorMode::uniform;
};

struct SamplerBlock {
    int steps = 32;
    double rho = 7.0;
    int n_per_class = 1024;
    int ipc = 10;
};

// One experiment, fully specified. Serialized as strict JSON: unknown keys
// anywhere in the document are rejected.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out; // output directory; may also come from the --out flag

    MixtureSpec mixture;
    Schedule schedule;
    DataBlock data;
    CorruptionBlock corruption;
    TrainConfig train;
    PriorMode train_prior = PriorMode::uniform; // resolved into train.class_prior
    ClassifierBlock classifier;
    SamplerBlock sampler;

    void validate() const; // throws std::invalid_argument
};

// Two-class 2D mixture, well separated, with the standard schedule.
ExperimentConfig default_config();

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg); // round-trips through parse_config

// Dotted-path override, e.g. "train.lr=0.0005" or "corruption.mode=semi".
// The value is parsed as JSON when possible, else taken as a string.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Transition matrix implied by a noisy corruption mode; throws for others.
TransitionMatrix corruption_transition(const CorruptionBlock& cb, int c);

} // namespace wsdiff
