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

#ifndef VEIL_FEATURES_HPP
#define VEIL_FEATURES_HPP

#include "veil/text.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace veil {

enum class Weighting { binary, tfidf };

struct NgramRange {
    int lo = 1;
    int hi = 1;

    friend bool operator==(const NgramRange&, const NgramRange&) = default;
};

struct FeatureConfig {
    NgramRange word_ngrams{1, 1};
    std::optional<int> char_ngrams;
    Weighting weighting = Weighting::tfidf;
    bool sublinear_tf = false;
    int min_df = 1;
    double max_df_fraction = 1.0;
    bool l2_normalize = false;
    // Tokens skipped before any gram is built (e.g. an augmentation marker).
    std::vector<std::string> ignored_tokens;

    void validate() const;

    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

Weighting parse_weighting(std::string_view name);
std::string to_string(Weighting w);

/// Sorted (column, value) pairs; zero values are never stored.
class SparseVector {
public:
    struct Entry {
        std::uint32_t index;
        double value;
    };

    SparseVector() = default;

    /// `entries` must be strictly increasing by index.
    explicit SparseVector(std::vector<Entry> entries);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    double dot(std::span<const double> dense) const;
    double squared_norm() const;

    friend bool operator==(const SparseVector& a, const SparseVector& b) {
        if (a.entries_.size() != b.entries_.size()) return false;
        for (std::size_t i = 0; i < a.entries_.size(); ++i)
            if (a.entries_[i].index != b.entries_[i].index || a.entries_[i].value != b.entries_[i].value)
                return false;
        return true;
    }

private:
    std::vector<Entry> entries_;
};

/// Gram occurrence counts of a token sequence under `config`. Word grams are
/// keyed "w:" + space-joined tokens, character grams "c:" + characters.
/// Tokens containing spaces (a split heuristic) count as separate words.
std::map<std::string, int> extract_grams(std::span<const std::string> tokens,
                                         const FeatureConfig& config);

class FeatureSpace {
public:
    FeatureSpace() = default;

    static FeatureSpace fit(const LabeledCorpus& corpus, const FeatureConfig& config);

    /// Rebuilds a fitted space from stored parts; `grams` must be sorted and unique.
    static FeatureSpace from_parts(FeatureConfig config, std::vector<std::string> grams,
                                   std::vector<double> idf, std::size_t n_docs_fit);

    SparseVector transform(std::span<const std::string> tokens) const;
    SparseVector transform(const Document& doc) const { return transform(doc.tokens); }

    std::size_t size() const noexcept { return grams_.size(); }
    const std::vector<std::string>& grams() const noexcept { return grams_; }
    const std::vector<double>& idf() const noexcept { return idf_; }
    const FeatureConfig& config() const noexcept { return config_; }
    std::size_t n_docs_fit() const noexcept { return n_docs_fit_; }
    std::optional<std::uint32_t> column(const std::string& gram) const;

private:
    FeatureConfig config_;
    std::vector<std::string> grams_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<double> idf_;
    std::size_t n_docs_fit_ = 0;
};

} // namespace veil

#endif // VEIL_FEATURES_HPP
