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

#ifndef VEIL_METRICS_HPP
#define VEIL_METRICS_HPP

#include <json.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace veil {

double accuracy(std::span<const std::string> preds, std::span<const std::string> gold);

/// Share of the most frequent gold label (the chance level p).
double majority_baseline(std::span<const std::string> gold);

/// accuracy - p. Negative values mean the adversary fell below chance.
double delta_accuracy(std::span<const std::string> preds, std::span<const std::string> gold, double p);
double delta_accuracy(double accuracy, double p);

/// TP / gold positives.
double tpr(std::span<const std::string> preds, std::span<const std::string> gold,
           const std::string& positive_label);
inline double tpr_decrease(double before, double after) { return before - after; }

/// Positive-class F1; 0 when precision and recall are both undefined or zero.
double f1_score(std::span<const std::string> preds, std::span<const std::string> gold,
                const std::string& positive_label);
double macro_f1(std::span<const std::string> preds, std::span<const std::string> gold,
                std::span<const std::string> labels);

/// Exact-match unigram METEOR: Fmean = 10PR / (R + 9P), fragmentation
/// penalty 0.5 * (chunks / matches)^3.
double meteor_lite(std::span<const std::string> hypothesis, std::span<const std::string> reference);

/// Changed positions / token count. Token counts must agree; a token
/// replaced by a space-split pair is stored as one token and counts once.
double change_rate(std::span<const std::string> original, std::span<const std::string> perturbed);
std::size_t change_count(std::span<const std::string> original, std::span<const std::string> perturbed);

struct EvalReport {
    std::size_t n = 0;
    std::map<std::string, std::size_t> label_counts;
    double accuracy = 0.0;
    double chance_p = 0.0;
    double delta_accuracy = 0.0;
    double tpr = 0.0;
    double meteor_mean = 0.0;
    double change_rate_mean = 0.0;
};

/// Aggregates predictions on (possibly perturbed) documents. `originals` and
/// `perturbed` are token sequences aligned with `preds`; pass empty spans to
/// skip the similarity columns.
EvalReport evaluate(std::span<const std::string> preds, std::span<const std::string> gold,
                    const std::string& positive_label,
                    std::span<const std::vector<std::string>> originals = {},
                    std::span<const std::vector<std::string>> perturbed = {});

nlohmann::json to_json(const EvalReport& report);

/// Fixed-width table, one row per (name, report).
std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

} // namespace veil

#endif // VEIL_METRICS_HPP
