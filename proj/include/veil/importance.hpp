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

#ifndef VEIL_IMPORTANCE_HPP
#define VEIL_IMPORTANCE_HPP

#include "veil/models.hpp"

#include <span>
#include <string>
#include <vector>

namespace veil {

struct ImportanceScore {
    std::size_t token_index = 0;
    double score = 0.0;
    std::size_t pre_label = 0;   // prediction on the full document
    std::size_t post_label = 0;  // prediction with the token deleted
};

/// Omission-based importance of every token for protected label `y` under
/// `model`. With o the logits of the full document and o' those of the
/// document without token i:
///   score = o_y - o'_y                                 if the prediction stays y
///   score = (o_y - o'_y) + (o'_ybar - o_ybar)          if deleting i flips y to ybar
/// where ybar is the post-deletion argmax. When the model does not predict y
/// on the full document only the first term is used; pre_label records it.
std::vector<ImportanceScore> omission_scores(const ClassifierModel& model, std::span<const std::string> tokens,
                                             std::string_view y);

struct TargetSet {
    std::vector<std::size_t> indices;  // descending by score
};

/// Indices scoring at least `min_score`, best first (ties: lower index),
/// truncated to `k`.
TargetSet select_targets(std::span<const ImportanceScore> scores, std::size_t k, double min_score);

/// Tokens with position `index` removed.
std::vector<std::string> delete_token(std::span<const std::string> tokens, std::size_t index);

} // namespace veil

#endif // VEIL_IMPORTANCE_HPP
