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

#ifndef VEIL_TEXT_HPP
#define VEIL_TEXT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace veil {

using Tokens = std::vector<std::string>;

struct Document {
    std::string id;
    Tokens tokens;
    std::string raw;
    std::optional<std::string> label;

    /// Tokens joined by single spaces (the normalized form).
    std::string text() const;

    /// Author key: the part of `id` before the first ':', or the whole id.
    std::string author() const;

    static Document from_text(std::string id, std::string raw, std::optional<std::string> label = {});
};

class LabeledCorpus {
public:
    LabeledCorpus() = default;

    /// Collects the distinct labels of `documents` in lexicographic order.
    explicit LabeledCorpus(std::vector<Document> documents);

    /// Uses an explicit label set; every labelled document must belong to it.
    LabeledCorpus(std::vector<Document> documents, std::vector<std::string> labels);

    const std::vector<Document>& documents() const noexcept { return documents_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return documents_.size(); }
    bool empty() const noexcept { return documents_.empty(); }
    const Document& operator[](std::size_t i) const { return documents_[i]; }

    /// Index of `label` in labels(), or nullopt.
    std::optional<std::size_t> label_index(std::string_view label) const;

    /// Count of documents per label, aligned with labels().
    std::vector<std::size_t> label_counts() const;

private:
    std::vector<Document> documents_;
    std::vector<std::string> labels_;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;
};

enum class CorpusFormat { jsonl, tsv };

CorpusFormat parse_corpus_format(std::string_view name);

/// Lowercases, maps @mentions to `<user>`, drops URLs, splits `#tag` into
/// `#` and `tag`, and separates punctuation runs from words.
Tokens tokenize(std::string_view text);

LabeledCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
LabeledCorpus parse_corpus(std::string_view content, CorpusFormat format);

/// One jsonl line per document with `id`, `text` and (when present) `label`.
void write_corpus_jsonl(const LabeledCorpus& corpus, const std::filesystem::path& path);

/// Concatenates consecutive documents of each author into chunks of at most
/// `max_docs_per_chunk` documents. Authors appear in first-seen order.
LabeledCorpus chunk_by_author(const LabeledCorpus& corpus, std::size_t max_docs_per_chunk);

/// Deterministic train/test split. Both halves keep the original corpus order.
std::pair<LabeledCorpus, LabeledCorpus> split(const LabeledCorpus& corpus, const SplitSpec& spec);

/// Number of training documents allotted to each label (aligned with
/// corpus.labels()) by the stratified split.
std::vector<std::size_t> stratified_train_counts(const std::vector<std::size_t>& label_counts,
                                                 double train_fraction);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

std::set<std::string> vocabulary(const LabeledCorpus& corpus);

// UTF-8 helpers used by the tokenizer and the character-level generators.
std::vector<std::string> utf8_chars(std::string_view s);
std::size_t utf8_length(std::string_view s);
std::string to_lower(std::string_view s);

} // namespace veil

#endif // VEIL_TEXT_HPP
