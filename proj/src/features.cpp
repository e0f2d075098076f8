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

#include "veil/features.hpp"

#include "veil/error.hpp"

#include <algorithm>
#include <cmath>

namespace veil {

void FeatureConfig::validate() const {
    if (word_ngrams.lo < 1 || word_ngrams.hi < word_ngrams.lo || word_ngrams.hi > 3)
        throw ConfigError("word n-gram range must satisfy 1 <= lo <= hi <= 3");
    if (char_ngrams && *char_ngrams < 1) throw ConfigError("character n-gram length must be positive");
    if (min_df < 1) throw ConfigError("min_df must be at least 1");
    if (!(max_df_fraction > 0.0 && max_df_fraction <= 1.0))
        throw ConfigError("max_df_fraction must lie in (0, 1]");
}

Weighting parse_weighting(std::string_view name) {
    if (name == "binary") return Weighting::binary;
    if (name == "tfidf") return Weighting::tfidf;
    throw ConfigError("unknown weighting '" + std::string(name) + "' (expected binary or tfidf)");
}

std::string to_string(Weighting w) { return w == Weighting::binary ? "binary" : "tfidf"; }

SparseVector::SparseVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 1; i < entries_.size(); ++i)
        if (entries_[i].index <= entries_[i - 1].index)
            throw Error("sparse vector indices must be strictly increasing");
    std::erase_if(entries_, [](const Entry& e) { return e.value == 0.0; });
}

double SparseVector::dot(std::span<const double> dense) const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value * dense[e.index];
    return s;
}

double SparseVector::squared_norm() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value * e.value;
    return s;
}

std::map<std::string, int> extract_grams(std::span<const std::string> tokens,
                                         const FeatureConfig& config) {
    std::vector<std::string> words;
    words.reserve(tokens.size());
    for (const auto& t : tokens) {
        std::size_t start = 0;
        while (start <= t.size()) {
            const auto space = t.find(' ', start);
            const auto part = t.substr(start, space == std::string::npos ? std::string::npos : space - start);
            if (!part.empty()) words.push_back(part);
            if (space == std::string::npos) break;
            start = space + 1;
        }
    }
    if (!config.ignored_tokens.empty()) {
        std::erase_if(words, [&](const std::string& w) {
            const auto lw = to_lower(w);
            return std::any_of(config.ignored_tokens.begin(), config.ignored_tokens.end(),
                               [&](const std::string& ig) { return to_lower(ig) == lw; });
        });
    }

    std::map<std::string, int> grams;
    for (int n = config.word_ngrams.lo; n <= config.word_ngrams.hi; ++n) {
        const auto len = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + len <= words.size(); ++i) {
            std::string g = "w:";
            for (std::size_t k = 0; k < len; ++k) {
                if (k) g += ' ';
                g += words[i + k];
            }
            ++grams[g];
        }
    }
    if (config.char_ngrams) {
        const auto len = static_cast<std::size_t>(*config.char_ngrams);
        for (const auto& w : words) {
            const auto chars = utf8_chars(w);
            for (std::size_t i = 0; i + len <= chars.size(); ++i) {
                std::string g = "c:";
                for (std::size_t k = 0; k < len; ++k) g += chars[i + k];
                ++grams[g];
            }
        }
    }
    return grams;
}

FeatureSpace FeatureSpace::fit(const LabeledCorpus& corpus, const FeatureConfig& config) {
    config.validate();
    if (corpus.empty()) throw ConfigError("cannot fit features on an empty corpus");

    std::map<std::string, std::size_t> df;
    for (const auto& d : corpus.documents())
        for (const auto& [gram, count] : extract_grams(d.tokens, config)) ++df[gram];

    const double n = static_cast<double>(corpus.size());
    const double max_df = config.max_df_fraction * n;
    std::vector<std::string> grams;
    std::vector<double> idf;
    for (const auto& [gram, count] : df) {
        if (count < static_cast<std::size_t>(config.min_df) || static_cast<double>(count) > max_df + 1e-9)
            continue;
        grams.push_back(gram);
        idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    if (grams.empty()) throw ConfigError("feature vocabulary is empty after document-frequency filtering");
    return from_parts(config, std::move(grams), std::move(idf), corpus.size());
}

FeatureSpace FeatureSpace::from_parts(FeatureConfig config, std::vector<std::string> grams,
                                      std::vector<double> idf, std::size_t n_docs_fit) {
    if (grams.size() != idf.size()) throw Error("gram and idf counts differ");
    FeatureSpace space;
    space.config_ = std::move(config);
    space.grams_ = std::move(grams);
    space.idf_ = std::move(idf);
    space.n_docs_fit_ = n_docs_fit;
    space.index_.reserve(space.grams_.size());
    for (std::size_t i = 0; i < space.grams_.size(); ++i) {
        if (i && !(space.grams_[i - 1] < space.grams_[i]))
            throw Error("grams must be sorted and unique");
        space.index_.emplace(space.grams_[i], static_cast<std::uint32_t>(i));
    }
    return space;
}

std::optional<std::uint32_t> FeatureSpace::column(const std::string& gram) const {
    const auto it = index_.find(gram);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

SparseVector FeatureSpace::transform(std::span<const std::string> tokens) const {
    std::vector<SparseVector::Entry> entries;
    for (const auto& [gram, tf] : extract_grams(tokens, config_)) {
        const auto col = column(gram);
        if (!col) continue;
        double value = 1.0;
        if (config_.weighting == Weighting::tfidf) {
            const double t = config_.sublinear_tf ? 1.0 + std::log(static_cast<double>(tf)) : tf;
            value = t * idf_[*col];
        }
        entries.push_back({*col, value});
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    if (config_.l2_normalize) {
        double norm = 0.0;
        for (const auto& e : entries) norm += e.value * e.value;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (auto& e : entries) e.value /= norm;
    }
    return SparseVector(std::move(entries));
}

} // namespace veil
