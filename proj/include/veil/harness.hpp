/*
 * Copyright 2026 The Veil Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Experiment orchestration: synthetic fixtures, transfer matrices and
// augmentation robustness runs driven by a TOML plan.

#ifndef VEIL_HARNESS_HPP
#define VEIL_HARNESS_HPP

#include "veil/attack.hpp"
#include "veil/metrics.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace veil {

// ---------------------------------------------------------------- fixture

struct FixtureSpec {
    std::size_t n_docs = 1000;
    std::size_t filler_vocab = 240;
    std::size_t filler_cluster = 4;   // fillers sharing one embedding center
    std::size_t markers_per_class = 12;
    std::size_t variants_per_marker = 5;  // embedding-only neighbours of a marker
    std::size_t dim = 64;
    std::size_t min_length = 20;
    std::size_t max_length = 30;
    std::size_t min_markers = 1;
    std::size_t max_markers = 3;
    double noise_rate = 0.0;  // chance a document also carries one other-class marker
    double spread = 0.4;      // norm of the per-word offset from its center
    std::vector<std::string> labels{"A", "B"};
    std::uint64_t seed = 1;

    void validate() const;
};

struct Fixture {
    LabeledCorpus corpus;
    EmbeddingTable embeddings;
    std::map<std::string, std::vector<std::string>> markers;  // per label
    std::map<std::string, std::vector<std::string>> variants;  // per marker
    std::vector<std::string> fillers;
};

/// Two-class corpus of filler words plus class markers. Each marker has
/// planted neighbours in the embedding table that never occur in the corpus
/// and share no character 4-gram with it.
Fixture make_fixture(const FixtureSpec& spec);

/// Word2vec text format with a "count dim" header, fixed 9-digit precision.
void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

// ---------------------------------------------------------------- plan

enum class PlanMode { transfer, robustness };

std::string to_string(PlanMode m);

struct ModelSpec {
    std::string preset;
    ModelKind kind = ModelKind::logreg;
    FeatureConfig features;
    TrainConfig train;
};

/// Named model presets: logreg, ngram, svm, nbsvm, nb_multinomial,
/// nb_gaussian.
ModelSpec model_preset(std::string_view name);
ClassifierModel train_model(const LabeledCorpus& corpus, const ModelSpec& spec);

struct CorpusRef {
    std::filesystem::path path;
    CorpusFormat format = CorpusFormat::jsonl;
};

struct SubstituteSpec {
    std::string name;
    CorpusRef corpus;
    ModelSpec model;
};

struct TargetSpec {
    CorpusRef corpus;
    std::vector<ModelSpec> models;
};

struct AttackSpec {
    std::string name;
    bool identity = false;  // generators = [] : leave documents untouched
    AttackConfig config;
    std::optional<std::filesystem::path> embeddings;
    std::optional<std::filesystem::path> lexicon;
    std::optional<std::filesystem::path> pos_lexicon;
    std::optional<std::string> encoder_endpoint;
};

struct SampleSpec {
    std::size_t size = 200;
    double train_fraction = 0.8;
    std::optional<std::string> positive_label;
};

struct ExperimentPlan {
    PlanMode mode = PlanMode::transfer;
    std::uint64_t seed = 0;
    std::vector<SubstituteSpec> substitutes;
    TargetSpec target;
    std::vector<AttackSpec> attacks;
    SampleSpec sample;
};

/// Parses a plan. Relative paths resolve against `base_dir`. Errors are
/// ConfigError messages naming the offending key, e.g. "attack.syn.k: ...".
ExperimentPlan parse_plan(std::string_view toml, const std::filesystem::path& base_dir,
                          const std::optional<std::string>& default_encoder_endpoint = {});
ExperimentPlan load_plan(const std::filesystem::path& path,
                         const std::optional<std::string>& default_encoder_endpoint = {});
nlohmann::json to_json(const ExperimentPlan& plan);

// ---------------------------------------------------------------- transfer

struct TransferRow {
    std::string substitute;  // "-" for the unattacked row
    std::string attack;      // "none" for the unattacked row
    std::vector<EvalReport> cells;  // one per target model
    std::optional<EvalReport> substitute_report;  // f' on the attacked sample
    double success_rate = 0.0;    // fraction of the sample flipped on f'
    std::uint64_t target_queries_during_attack = 0;
};

struct TransferMatrix {
    std::vector<std::string> columns;  // target model presets
    std::vector<TransferRow> rows;
    std::string positive_label;
    std::size_t sample_size = 0;
    nlohmann::json plan;
    std::vector<std::string> warnings;

    const TransferRow* find(std::string_view substitute, std::string_view attack) const;
};

TransferMatrix run_transfer(const ExperimentPlan& plan);

// ---------------------------------------------------------------- robustness

struct RobustnessModelReport {
    std::string model;
    double tpr_original = 0.0;                 // f on X_pos
    std::vector<std::optional<double>> tpr_perturbed;  // Exp 1: f on X'_pos, per augmenter
    std::vector<std::string> rows;             // "plain" + augmenters
    std::vector<EvalReport> clean;             // Exp 2: f_row on X_test
    std::vector<std::vector<double>> delta_tpr;  // Exp 3: [row][augmenter]
    std::vector<std::size_t> augmented_samples;  // per row
};

struct RobustnessReport {
    std::vector<std::string> augmenters;
    std::string positive_label;
    std::size_t sample_size = 0;
    std::vector<RobustnessModelReport> models;
    nlohmann::json plan;
    std::vector<std::string> warnings;
};

RobustnessReport run_robustness(const ExperimentPlan& plan);

nlohmann::json to_json(const TransferRow& row);
nlohmann::json to_json(const TransferMatrix& m);
nlohmann::json to_json(const RobustnessReport& r);
std::string format_transfer(const TransferMatrix& m);
std::string format_robustness(const RobustnessReport& r);

/// Writes <dir>/transfer.json + transfer.txt (or robustness.*). Returns the
/// paths written.
std::vector<std::filesystem::path> write_report(const TransferMatrix& m, const std::filesystem::path& dir);
std::vector<std::filesystem::path> write_report(const RobustnessReport& r, const std::filesystem::path& dir);

/// Loads the resources an attack spec names.
struct LoadedResources {
    std::optional<EmbeddingTable> embeddings;
    std::optional<Lexicon> lexicon;
    std::optional<PosLexicon> pos;
    std::optional<EncoderClient> encoder;

    AttackResources view() const;
};

LoadedResources load_resources(const AttackSpec& spec);

} // namespace veil

#endif // VEIL_HARNESS_HPP
