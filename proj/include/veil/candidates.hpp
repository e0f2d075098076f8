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

#ifndef VEIL_CANDIDATES_HPP
#define VEIL_CANDIDATES_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace veil {

enum class Generator { synonym, leet, flip, space, lexicon, external_masked, external_dropout };

Generator parse_generator(std::string_view name);
std::string to_string(Generator g);
bool is_external(Generator g);

struct Candidate {
    std::string token;
    double score = 0.0;
    Generator generator = Generator::synonym;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Word vectors of a fixed dimension. Words are lowercased on insertion; a
/// repeated word keeps its first vector.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    static EmbeddingTable load(const std::filesystem::path& path);
    /// Text format: optional "<count> <dim>" header, then "word v1 ... vd".
    static EmbeddingTable parse(std::string_view content);

    void add(std::string_view word, std::vector<double> vector);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return words_.size(); }
    const std::vector<std::string>& words() const noexcept { return words_; }
    std::optional<std::size_t> index(std::string_view word) const;
    std::span<const double> vector(std::size_t i) const {
        return std::span<const double>(data_).subspan(i * dim_, dim_);
    }
    double norm(std::size_t i) const { return norms_[i]; }

    /// Cosine between rows; 0 when either row is the zero vector.
    double cosine(std::size_t a, std::size_t b) const;

private:
    std::size_t dim_ = 0;
    std::vector<std::string> words_;
    std::vector<double> data_;
    std::vector<double> norms_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Cosine of two equal-length vectors; 0 when either has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

struct SynonymConfig {
    std::size_t n = 50;
    double delta = 0.7;

    void validate() const;
};

/// Every other word with cosine strictly above delta, best first (ties by
/// word), at most n. Empty when `t` is not in the table.
std::vector<Candidate> synonym_candidates(std::string_view t, const EmbeddingTable& table, const SynonymConfig& cfg);

/// a->4 e->3 i->1 l->1 o->0 s->5 t->7, either case; other characters kept.
Candidate heuristic_leet(std::string_view t);

/// Swaps the two characters straddling the middle (positions ceil(n/2)-1
/// and ceil(n/2)) of words with at least four characters.
Candidate heuristic_flip(std::string_view t);

/// Splits `t` at a seeded uniform position in [1, n-1]: "left right".
Candidate heuristic_space(std::string_view t, std::uint64_t seed);
Candidate heuristic_space_at(std::string_view t, std::size_t split);
/// The split position heuristic_space draws for (t, seed); 0 when |t| < 2.
std::size_t space_split_index(std::string_view t, std::uint64_t seed);

using Lexicon = std::map<std::string, std::vector<std::string>>;

/// tsv "word<TAB>syn1,syn2,...".
Lexicon parse_lexicon(std::string_view content);
Lexicon load_lexicon(const std::filesystem::path& path);

/// Entries for `t` in file order, de-duplicated, score 1/rank.
std::vector<Candidate> lexicon_candidates(std::string_view t, const Lexicon& lexicon);

/// Drops the target itself (any case), single characters, plural and
/// de-pluralized forms of the target, case variants of kept candidates,
/// "##" word pieces, and duplicates.
std::vector<Candidate> sanitize(std::span<const Candidate> candidates, std::string_view t);

/// word -> coarse tags {NOUN, VERB, ADJ, ADV, OTHER}.
using PosLexicon = std::map<std::string, std::set<std::string>>;

/// tsv "word<TAB>TAG1|TAG2".
PosLexicon parse_pos_lexicon(std::string_view content);
PosLexicon load_pos_lexicon(const std::filesystem::path& path);

/// Keeps a candidate iff its tag set intersects the target's. Without a
/// lexicon, or for words the lexicon does not know, always keeps.
bool pos_filter(std::span<const std::string> tokens, std::size_t target_index, std::string_view candidate,
                const PosLexicon* lexicon);

/// Cosine of the mean token vectors; unknown tokens contribute zeros.
double sentence_similarity(std::span<const std::string> a, std::span<const std::string> b,
                           const EmbeddingTable& table);

struct ContextualEncoding {
    std::vector<std::vector<double>> vectors;  // one per token
    std::vector<double> attention;             // attention of each token to the target, sums to 1

    void validate() const;
};

/// Sum over tokens of attention_i(original) * cos(h_i, h'_i).
double contextual_sim(const ContextualEncoding& original, const ContextualEncoding& perturbed);

/// Static stand-in for a contextual encoder: table vectors (a fixed
/// pseudo-random unit vector for unknown tokens) and uniform attention.
ContextualEncoding static_encoding(std::span<const std::string> tokens, const EmbeddingTable& table);

} // namespace veil

#endif // VEIL_CANDIDATES_HPP
