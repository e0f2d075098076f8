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

#include "veil/metrics.hpp"

#include "veil/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace veil {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
    if (a != b) throw ConfigError("prediction and gold counts differ");
    if (a == 0) throw ConfigError("metric over an empty document set");
}

} // namespace

double accuracy(std::span<const std::string> preds, std::span<const std::string> gold) {
    check_aligned(preds.size(), gold.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == gold[i];
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double majority_baseline(std::span<const std::string> gold) {
    if (gold.empty()) throw ConfigError("majority baseline over an empty document set");
    std::map<std::string, std::size_t> counts;
    for (const auto& g : gold) ++counts[g];
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(gold.size());
}

double delta_accuracy(double acc, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("majority baseline must lie in [0, 1]");
    return acc - p;
}

double delta_accuracy(std::span<const std::string> preds, std::span<const std::string> gold, double p) {
    return delta_accuracy(accuracy(preds, gold), p);
}

double tpr(std::span<const std::string> preds, std::span<const std::string> gold,
           const std::string& positive_label) {
    if (preds.size() != gold.size()) throw ConfigError("prediction and gold counts differ");
    std::size_t positives = 0, hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] != positive_label) continue;
        ++positives;
        hits += preds[i] == positive_label;
    }
    if (positives == 0) throw ConfigError("TPR is undefined without gold positives");
    return static_cast<double>(hits) / static_cast<double>(positives);
}

double f1_score(std::span<const std::string> preds, std::span<const std::string> gold,
                const std::string& positive_label) {
    check_aligned(preds.size(), gold.size());
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == positive_label, g = gold[i] == positive_label;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    if (tp == 0) return 0.0;
    return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

double macro_f1(std::span<const std::string> preds, std::span<const std::string> gold,
                std::span<const std::string> labels) {
    if (labels.empty()) throw ConfigError("macro F1 needs at least one label");
    double sum = 0.0;
    for (const auto& l : labels) sum += f1_score(preds, gold, l);
    return sum / static_cast<double>(labels.size());
}

double meteor_lite(std::span<const std::string> hypothesis, std::span<const std::string> reference) {
    if (reference.empty()) throw ConfigError("METEOR needs a non-empty reference");
    if (hypothesis.empty()) return 0.0;

    // Leftmost-greedy exact alignment; each reference token is used once.
    std::vector<bool> used(reference.size(), false);
    std::vector<long> aligned(hypothesis.size(), -1);
    std::size_t matches = 0;
    for (std::size_t h = 0; h < hypothesis.size(); ++h) {
        for (std::size_t r = 0; r < reference.size(); ++r) {
            if (!used[r] && reference[r] == hypothesis[h]) {
                used[r] = true;
                aligned[h] = static_cast<long>(r);
                ++matches;
                break;
            }
        }
    }
    if (matches == 0) return 0.0;

    std::size_t chunks = 0;
    long prev = -2;
    bool in_chunk = false;
    for (const long r : aligned) {
        if (r < 0) {
            in_chunk = false;
            continue;
        }
        if (!in_chunk || r != prev + 1) ++chunks;
        in_chunk = true;
        prev = r;
    }

    const double m = static_cast<double>(matches);
    const double precision = m / static_cast<double>(hypothesis.size());
    const double recall = m / static_cast<double>(reference.size());
    const double fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    const double penalty = 0.5 * std::pow(static_cast<double>(chunks) / m, 3.0);
    return fmean * (1.0 - penalty);
}

std::size_t change_count(std::span<const std::string> original, std::span<const std::string> perturbed) {
    if (original.size() != perturbed.size())
        throw ConfigError("change rate needs token-aligned documents (" + std::to_string(original.size()) +
                          " vs " + std::to_string(perturbed.size()) + " tokens)");
    std::size_t changed = 0;
    for (std::size_t i = 0; i < original.size(); ++i) changed += original[i] != perturbed[i];
    return changed;
}

double change_rate(std::span<const std::string> original, std::span<const std::string> perturbed) {
    const auto changed = change_count(original, perturbed);
    if (original.empty()) return 0.0;
    return static_cast<double>(changed) / static_cast<double>(original.size());
}

EvalReport evaluate(std::span<const std::string> preds, std::span<const std::string> gold,
                    const std::string& positive_label, std::span<const std::vector<std::string>> originals,
                    std::span<const std::vector<std::string>> perturbed) {
    EvalReport r;
    r.n = gold.size();
    for (const auto& g : gold) ++r.label_counts[g];
    r.accuracy = accuracy(preds, gold);
    r.chance_p = majority_baseline(gold);
    r.delta_accuracy = delta_accuracy(r.accuracy, r.chance_p);
    r.tpr = r.label_counts.count(positive_label) ? tpr(preds, gold, positive_label) : 0.0;
    if (!originals.empty()) {
        if (originals.size() != perturbed.size() || originals.size() != gold.size())
            throw ConfigError("original and perturbed document counts differ");
        double meteor = 0.0, change = 0.0;
        for (std::size_t i = 0; i < originals.size(); ++i) {
            meteor += originals[i].empty() ? 0.0 : meteor_lite(perturbed[i], originals[i]);
            change += change_rate(originals[i], perturbed[i]);
        }
        r.meteor_mean = meteor / static_cast<double>(originals.size());
        r.change_rate_mean = change / static_cast<double>(originals.size());
    }
    return r;
}

nlohmann::json to_json(const EvalReport& r) {
    return {{"n", r.n},
            {"label_counts", r.label_counts},
            {"accuracy", r.accuracy},
            {"chance_p", r.chance_p},
            {"delta_accuracy", r.delta_accuracy},
            {"tpr", r.tpr},
            {"meteor_mean", r.meteor_mean},
            {"change_rate_mean", r.change_rate_mean}};
}

std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::size_t width = 4;
    for (const auto& [name, r] : rows) width = std::max(width, name.size());
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s %6s %8s %8s %8s %8s %8s %8s\n", static_cast<int>(width), "name", "n",
                  "acc", "p", "d_acc", "tpr", "meteor", "change");
    out += buf;
    for (const auto& [name, r] : rows) {
        std::snprintf(buf, sizeof buf, "%-*s %6zu %8.4f %8.4f %+8.4f %8.4f %8.4f %8.4f\n",
                      static_cast<int>(width), name.c_str(), r.n, r.accuracy, r.chance_p, r.delta_accuracy,
                      r.tpr, r.meteor_mean, r.change_rate_mean);
        out += buf;
    }
    return out;
}

} // namespace veil
