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

#include "veil/attack.hpp"

#include "veil/error.hpp"
#include "veil/metrics.hpp"

#include <algorithm>

namespace veil {

using json = nlohmann::json;

SimilarityRanker parse_similarity_ranker(std::string_view name) {
    if (name == "none") return SimilarityRanker::none;
    if (name == "sentence") return SimilarityRanker::sentence;
    if (name == "contextual") return SimilarityRanker::contextual;
    throw ConfigError("unknown similarity ranker '" + std::string(name) + "'");
}

std::string to_string(SimilarityRanker r) {
    switch (r) {
    case SimilarityRanker::none: return "none";
    case SimilarityRanker::sentence: return "sentence";
    case SimilarityRanker::contextual: return "contextual";
    }
    return "?";
}

std::string to_string(AttackMode m) { return m == AttackMode::targeted ? "targeted" : "augment"; }

AttackConfig AttackConfig::augmentation() {
    AttackConfig c;
    c.mode = AttackMode::augment;
    c.min_score = kAugmentMinScore;
    c.max_samples = 5;
    c.sanitize = true;
    c.mark_token = kAugmentMarker;
    c.dropout_p = kAugmentDropout;
    return c;
}

void AttackConfig::validate() const {
    if (k < 1) throw ConfigError("target cap k must be at least 1");
    if (max_samples < 1) throw ConfigError("max_samples must be at least 1");
    if (generators.empty()) throw ConfigError("at least one candidate generator is required");
    if (!(dropout_p >= 0.0 && dropout_p <= 1.0)) throw ConfigError("dropout probability must lie in [0, 1]");
    synonyms.validate();
}

Tokens PerturbedDocument::rendered_tokens() const {
    Tokens out;
    if (marker && !marker->empty()) out.push_back(*marker);
    out.insert(out.end(), tokens.begin(), tokens.end());
    return out;
}

std::string PerturbedDocument::text() const {
    std::string out;
    for (const auto& t : rendered_tokens()) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

namespace {

void check_resources(const AttackConfig& cfg, const AttackResources& res) {
    for (const auto g : cfg.generators) {
        if (g == Generator::synonym && !res.embeddings)
            throw ConfigError("the synonym generator needs an embedding table");
        if (g == Generator::lexicon && !res.lexicon) throw ConfigError("the lexicon generator needs a synonym lexicon");
    }
}

std::uint64_t space_seed(std::uint64_t seed, std::size_t index) {
    return seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(index) + 1;
}

Tokens with_token(std::span<const std::string> tokens, std::size_t index, const std::string& token) {
    Tokens out(tokens.begin(), tokens.end());
    out[index] = token;
    return out;
}

struct Scored {
    Candidate candidate;
    Tokens doc;
};

// Filtering (POS and document similarity) and re-ranking of the candidate
// documents for one target.
std::vector<Scored> filter_and_rank(std::span<const std::string> original, std::span<const std::string> running,
                                    std::size_t index, std::vector<Candidate> candidates, const AttackConfig& cfg,
                                    const AttackResources& res, std::vector<std::string>* warnings) {
    std::vector<Scored> docs;
    for (auto& c : candidates) {
        auto d = with_token(running, index, c.token);
        if (cfg.checks) {
            if (!pos_filter(original, index, c.token, res.pos)) continue;
            if (res.embeddings && sentence_similarity(original, d, *res.embeddings) < cfg.sim_threshold) continue;
        }
        docs.push_back({std::move(c), std::move(d)});
    }

    if (cfg.similarity_ranker == SimilarityRanker::sentence && res.embeddings) {
        std::vector<std::pair<double, std::size_t>> keys;
        for (std::size_t i = 0; i < docs.size(); ++i)
            keys.emplace_back(sentence_similarity(original, docs[i].doc, *res.embeddings), i);
        std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<Scored> sorted;
        for (const auto& [s, i] : keys) sorted.push_back(std::move(docs[i]));
        docs = std::move(sorted);
    } else if (cfg.similarity_ranker == SimilarityRanker::contextual) {
        const EmbeddingTable empty;
        const EmbeddingTable& table = res.embeddings ? *res.embeddings : empty;
        auto encode = [&](std::span<const std::string> toks) {
            if (res.encoder) {
                try {
                    return res.encoder->encode(toks, index);
                } catch (const EncoderError& e) {
                    if (warnings) warnings->push_back(std::string("contextual ranking fell back to static vectors: ") + e.what());
                }
            }
            return static_encoding(toks, table);
        };
        const auto base = encode(original);
        std::vector<std::pair<double, std::size_t>> keys;
        for (std::size_t i = 0; i < docs.size(); ++i) keys.emplace_back(contextual_sim(base, encode(docs[i].doc)), i);
        std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<Scored> sorted;
        for (const auto& [s, i] : keys) sorted.push_back(std::move(docs[i]));
        docs = std::move(sorted);
    }
    return docs;
}

// One entry per position: original token and its latest replacement.
void record(PerturbedDocument& adv, std::size_t t, const std::string& token, Generator g) {
    adv.tokens[t] = token;
    for (auto& s : adv.substitutions)
        if (s.token_index == t) {
            s.new_token = token;
            s.generator = g;
            return;
        }
    adv.substitutions.push_back({t, adv.original[t], token, g});
}

} // namespace

std::vector<Candidate> gather_candidates(std::span<const std::string> context, std::size_t target_index,
                                         const AttackConfig& cfg, const AttackResources& res,
                                         std::vector<std::string>* warnings) {
    const std::string& t = context[target_index];
    std::vector<Candidate> out;
    for (const auto g : cfg.generators) {
        switch (g) {
        case Generator::synonym: {
            if (!res.embeddings) throw ConfigError("the synonym generator needs an embedding table");
            auto c = synonym_candidates(t, *res.embeddings, cfg.synonyms);
            out.insert(out.end(), c.begin(), c.end());
            break;
        }
        case Generator::leet: out.push_back(heuristic_leet(t)); break;
        case Generator::flip: out.push_back(heuristic_flip(t)); break;
        case Generator::space: out.push_back(heuristic_space(t, space_seed(cfg.seed, target_index))); break;
        case Generator::lexicon: {
            if (!res.lexicon) throw ConfigError("the lexicon generator needs a synonym lexicon");
            auto c = lexicon_candidates(t, *res.lexicon);
            if (c.size() > cfg.top_k_per_word) c.resize(cfg.top_k_per_word);
            out.insert(out.end(), c.begin(), c.end());
            break;
        }
        case Generator::external_masked:
        case Generator::external_dropout: {
            if (!res.encoder) {
                if (warnings) warnings->push_back(to_string(g) + ": no encoder endpoint configured");
                break;
            }
            const auto mode = g == Generator::external_masked ? EncoderMode::masked : EncoderMode::dropout;
            try {
                auto c = external_candidates(context, target_index, mode, cfg.top_k_per_word, cfg.dropout_p,
                                             *res.encoder);
                out.insert(out.end(), c.begin(), c.end());
            } catch (const EncoderError& e) {
                if (warnings) warnings->push_back(to_string(g) + ": " + e.what());
            }
            break;
        }
        }
    }
    std::erase_if(out, [&](const Candidate& c) { return c.token == t || c.token.empty(); });
    return out;
}

AttackResult obfuscate(const ClassifierModel& fprime, const Document& doc, std::string_view y,
                       const AttackConfig& cfg, const AttackResources& res) {
    cfg.validate();
    if (cfg.mode != AttackMode::targeted) throw ConfigError("obfuscate runs in targeted mode");
    check_resources(cfg, res);
    const auto yi = fprime.label_index(y);
    if (!yi) throw ConfigError("label '" + std::string(y) + "' is not one of the substitute model's labels");

    AttackResult result;
    if (cfg.checks && !res.pos) result.warnings.push_back("checks: no POS lexicon, POS check skipped");
    if (cfg.checks && !res.embeddings)
        result.warnings.push_back("checks: no embeddings, sentence-similarity check skipped");
    auto& adv = result.adv;
    adv.source_id = doc.id;
    adv.label = std::string(y);
    adv.original = doc.tokens;
    adv.tokens = doc.tokens;

    auto finish = [&](bool success) {
        result.final_logits = fprime.logits(adv.tokens);
        result.success = success;
        result.change_count = change_count(adv.original, adv.tokens);
        return result;
    };

    if (doc.tokens.empty()) return finish(argmax(fprime.logits(adv.tokens)) != *yi);
    auto running = fprime.logits(adv.tokens);
    // Already on the other side of the boundary: nothing to change.
    if (argmax(running) != *yi) return finish(true);

    result.importance = omission_scores(fprime, doc.tokens, y);
    result.targets = select_targets(result.importance, cfg.k, cfg.min_score);

    for (const std::size_t t : result.targets.indices) {
        const auto& context = cfg.original_context ? adv.original : adv.tokens;
        auto candidates = gather_candidates(context, t, cfg, res, &result.warnings);
        if (cfg.sanitize) candidates = sanitize(candidates, adv.tokens[t]);
        auto ranked = filter_and_rank(adv.original, adv.tokens, t, std::move(candidates), cfg, res, &result.warnings);

        std::optional<std::size_t> chosen_flip;
        double best_flip_sim = -2.0;
        std::vector<std::size_t> flip_steps;
        for (std::size_t c = 0; c < ranked.size(); ++c) {
            const auto& cand = ranked[c];
            const auto logits = fprime.logits(cand.doc);
            SubstitutionStep step{t, adv.tokens[t], cand.candidate.token, cand.candidate.generator,
                                  running[*yi], logits[*yi], false};
            if (argmax(logits) != *yi) {
                if (!cfg.checks) {
                    step.accepted = true;
                    result.steps.push_back(step);
                    record(adv, t, step.new_token, step.generator);
                    return finish(true);
                }
                // With checks on, the flipping document closest to the original wins.
                const double sim = res.embeddings ? sentence_similarity(adv.original, cand.doc, *res.embeddings) : 0.0;
                if (!chosen_flip || sim > best_flip_sim) {
                    chosen_flip = c;
                    best_flip_sim = sim;
                }
                flip_steps.push_back(result.steps.size());
                result.steps.push_back(step);
                continue;
            }
            if (logits[*yi] < running[*yi]) {
                step.accepted = true;
                record(adv, t, step.new_token, step.generator);
                running = logits;
            }
            result.steps.push_back(step);
        }
        if (chosen_flip) {
            const auto& cand = ranked[*chosen_flip];
            for (const auto s : flip_steps)
                if (result.steps[s].new_token == cand.candidate.token) {
                    result.steps[s].accepted = true;
                    break;
                }
            record(adv, t, cand.candidate.token, cand.candidate.generator);
            return finish(true);
        }
    }
    return finish(argmax(fprime.logits(adv.tokens)) != *yi);
}

std::vector<PerturbedDocument> augment(const ClassifierModel& fprime, const Document& doc, std::string_view y,
                                       const AttackConfig& cfg, const AttackResources& res) {
    cfg.validate();
    if (cfg.mode != AttackMode::augment) throw ConfigError("augment runs in augment mode");
    check_resources(cfg, res);
    if (doc.tokens.empty()) return {};

    const auto scores = omission_scores(fprime, doc.tokens, y);
    const auto targets = select_targets(scores, cfg.k, cfg.min_score);

    // Every target sees the original context; substitutions are independent.
    std::vector<std::vector<Candidate>> per_target;
    for (const std::size_t t : targets.indices) {
        auto candidates = gather_candidates(doc.tokens, t, cfg, res, nullptr);
        if (cfg.sanitize) candidates = sanitize(candidates, doc.tokens[t]);
        auto ranked = filter_and_rank(doc.tokens, doc.tokens, t, std::move(candidates), cfg, res, nullptr);
        std::vector<Candidate> kept;
        for (auto& r : ranked) {
            if (kept.size() == cfg.max_samples) break;
            kept.push_back(std::move(r.candidate));
        }
        per_target.push_back(std::move(kept));
    }

    std::vector<PerturbedDocument> samples;
    for (std::size_t j = 0; j < cfg.max_samples; ++j) {
        PerturbedDocument sample;
        sample.source_id = doc.id;
        sample.label = doc.label;
        sample.original = doc.tokens;
        sample.tokens = doc.tokens;
        sample.sample_rank = j + 1;
        if (cfg.mark_token && !cfg.mark_token->empty()) sample.marker = cfg.mark_token;
        for (std::size_t k = 0; k < targets.indices.size(); ++k) {
            if (per_target[k].size() <= j) continue;
            const std::size_t t = targets.indices[k];
            const auto& c = per_target[k][j];
            sample.tokens[t] = c.token;
            sample.substitutions.push_back({t, doc.tokens[t], c.token, c.generator});
        }
        if (sample.substitutions.empty()) break;
        samples.push_back(std::move(sample));
    }
    return samples;
}

json to_json(const SubstitutionStep& s) {
    return {{"index", s.token_index},      {"old", s.old_token},        {"new", s.new_token},
            {"generator", to_string(s.generator)}, {"o_y_before", s.o_y_before}, {"o_y_after", s.o_y_after},
            {"accepted", s.accepted}};
}

json to_json(const PerturbedDocument& d) {
    json subs = json::array();
    for (const auto& s : d.substitutions)
        subs.push_back({{"index", s.token_index}, {"old", s.old_token}, {"new", s.new_token},
                        {"generator", to_string(s.generator)}});
    json j = {{"source_id", d.source_id}, {"text", d.text()}, {"tokens", d.rendered_tokens()},
              {"substitutions", std::move(subs)}};
    if (d.label) j["label"] = *d.label;
    if (d.sample_rank) j["sample_rank"] = d.sample_rank;
    return j;
}

json to_json(const AttackConfig& c) {
    std::vector<std::string> gens;
    for (const auto g : c.generators) gens.push_back(to_string(g));
    return {{"mode", to_string(c.mode)},
            {"k", c.k},
            {"min_score", c.min_score},
            {"generators", gens},
            {"checks", c.checks},
            {"similarity_ranker", to_string(c.similarity_ranker)},
            {"sim_threshold", c.sim_threshold},
            {"top_k_per_word", c.top_k_per_word},
            {"max_samples", c.max_samples},
            {"sanitize", c.sanitize},
            {"mark_token", c.mark_token ? json(*c.mark_token) : json(nullptr)},
            {"synonym_n", c.synonyms.n},
            {"synonym_delta", c.synonyms.delta},
            {"dropout_p", c.dropout_p},
            {"seed", c.seed},
            {"original_context", c.original_context}};
}

} // namespace veil
