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

#ifndef VEIL_ATTACK_HPP
#define VEIL_ATTACK_HPP

#include "veil/candidates.hpp"
#include "veil/encoder.hpp"
#include "veil/importance.hpp"
#include "veil/models.hpp"
#include "veil/text.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace veil {

enum class AttackMode { targeted, augment };
enum class SimilarityRanker { none, sentence, contextual };

SimilarityRanker parse_similarity_ranker(std::string_view name);
std::string to_string(SimilarityRanker r);
std::string to_string(AttackMode m);

inline constexpr double kAugmentMinScore = 0.005;
inline constexpr const char* kAugmentMarker = "<A>";

struct AttackConfig {
    std::size_t k = 50;
    double min_score = 0.0;
    std::vector<Generator> generators{Generator::synonym};
    bool checks = false;
    SimilarityRanker similarity_ranker = SimilarityRanker::none;
    double sim_threshold = 0.84;
    std::size_t top_k_per_word = kDefaultExternalTopK;
    AttackMode mode = AttackMode::targeted;
    std::size_t max_samples = 5;
    bool sanitize = false;
    std::optional<std::string> mark_token;
    SynonymConfig synonyms;
    double dropout_p = kAttackDropout;
    std::uint64_t seed = 0;
    // Send the original rather than the partially perturbed document as
    // context to an external encoder.
    bool original_context = false;

    /// Untargeted augmentation defaults: omission threshold 0.005, five
    /// samples, sanitization on, "<A>" marker, dropout 0.2.
    static AttackConfig augmentation();

    void validate() const;
};

/// Optional resources the generators and checks draw on. Not owned.
struct AttackResources {
    const EmbeddingTable* embeddings = nullptr;
    const Lexicon* lexicon = nullptr;
    const PosLexicon* pos = nullptr;
    const EncoderClient* encoder = nullptr;
};

struct SubstitutionStep {
    std::size_t token_index = 0;
    std::string old_token;
    std::string new_token;
    Generator generator = Generator::synonym;
    double o_y_before = 0.0;  // running document, substitute model
    double o_y_after = 0.0;   // candidate document
    bool accepted = false;
};

struct Substitution {
    std::size_t token_index = 0;
    std::string old_token;
    std::string new_token;
    Generator generator = Generator::synonym;
};

/// A document after substitutions. `tokens` stays aligned with `original`
/// (a space split is one token containing a space); the marker, when set,
/// is rendered in front but belongs to no position.
struct PerturbedDocument {
    std::string source_id;
    std::optional<std::string> label;
    Tokens original;
    Tokens tokens;
    std::optional<std::string> marker;
    std::size_t sample_rank = 0;  // 1-based for augmentation samples
    std::vector<Substitution> substitutions;

    Tokens rendered_tokens() const;
    std::string text() const;
};

struct AttackResult {
    PerturbedDocument adv;
    std::vector<SubstitutionStep> steps;
    bool success = false;
    std::vector<double> final_logits;
    std::size_t change_count = 0;
    std::vector<ImportanceScore> importance;
    TargetSet targets;
    std::vector<std::string> warnings;
};

/// Candidates for position `target_index` of `context` from every configured
/// generator in declaration order. External failures are appended to
/// `warnings` and skipped. Candidates identical to the current token are
/// dropped.
std::vector<Candidate> gather_candidates(std::span<const std::string> context, std::size_t target_index,
                                         const AttackConfig& cfg, const AttackResources& res,
                                         std::vector<std::string>* warnings);

/// Targeted obfuscation against the substitute model `fprime` only.
AttackResult obfuscate(const ClassifierModel& fprime, const Document& doc, std::string_view y,
                       const AttackConfig& cfg, const AttackResources& res);

/// Untargeted augmentation: sample j puts the j-th ranked candidate at every
/// target that has one. At most cfg.max_samples samples.
std::vector<PerturbedDocument> augment(const ClassifierModel& fprime, const Document& doc, std::string_view y,
                                       const AttackConfig& cfg, const AttackResources& res);

nlohmann::json to_json(const SubstitutionStep& s);
nlohmann::json to_json(const PerturbedDocument& d);
nlohmann::json to_json(const AttackConfig& c);

} // namespace veil

#endif // VEIL_ATTACK_HPP
