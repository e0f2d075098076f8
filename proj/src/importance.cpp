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

#include "veil/importance.hpp"

#include "veil/error.hpp"

#include <algorithm>
#include <numeric>

namespace veil {

std::vector<std::string> delete_token(std::span<const std::string> tokens, std::size_t index) {
    std::vector<std::string> out;
    out.reserve(tokens.size() ? tokens.size() - 1 : 0);
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (i != index) out.push_back(tokens[i]);
    return out;
}

std::vector<ImportanceScore> omission_scores(const ClassifierModel& model, std::span<const std::string> tokens,
                                             std::string_view y) {
    const auto yi = model.label_index(y);
    if (!yi) throw ConfigError("label '" + std::string(y) + "' is not one of the model's labels");

    const auto full = model.logits(tokens);
    const std::size_t pre = argmax(full);

    std::vector<ImportanceScore> scores;
    scores.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        // Deleting a token also changes the n-grams that span it, so the
        // reduced document is featurized from scratch.
        const auto reduced = model.logits(delete_token(tokens, i));
        const std::size_t post = argmax(reduced);
        double score = full[*yi] - reduced[*yi];
        if (pre == *yi && post != *yi) score += reduced[post] - full[post];
        scores.push_back({i, score, pre, post});
    }
    return scores;
}

TargetSet select_targets(std::span<const ImportanceScore> scores, std::size_t k, double min_score) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i].score >= min_score) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a].score != scores[b].score) return scores[a].score > scores[b].score;
        return scores[a].token_index < scores[b].token_index;
    });
    if (order.size() > k) order.resize(k);
    TargetSet t;
    for (const auto i : order) t.indices.push_back(scores[i].token_index);
    return t;
}

} // namespace veil
