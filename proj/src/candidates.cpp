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

#include "veil/candidates.hpp"

#include "veil/error.hpp"
#include "veil/rng.hpp"
#include "veil/text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace veil {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> split_on(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_double(std::string_view s, double& out) {
    // from_chars for double is available in libstdc++ 11
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool is_integer(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

} // namespace

Generator parse_generator(std::string_view name) {
    if (name == "synonym") return Generator::synonym;
    if (name == "leet") return Generator::leet;
    if (name == "flip") return Generator::flip;
    if (name == "space") return Generator::space;
    if (name == "lexicon") return Generator::lexicon;
    if (name == "external_masked") return Generator::external_masked;
    if (name == "external_dropout") return Generator::external_dropout;
    throw ConfigError("unknown generator '" + std::string(name) + "'");
}

std::string to_string(Generator g) {
    switch (g) {
    case Generator::synonym: return "synonym";
    case Generator::leet: return "leet";
    case Generator::flip: return "flip";
    case Generator::space: return "space";
    case Generator::lexicon: return "lexicon";
    case Generator::external_masked: return "external_masked";
    case Generator::external_dropout: return "external_dropout";
    }
    return "?";
}

bool is_external(Generator g) { return g == Generator::external_masked || g == Generator::external_dropout; }

// ---------------------------------------------------------------------------
// Embeddings

void EmbeddingTable::add(std::string_view word, std::vector<double> vector) {
    if (dim_ == 0 && words_.empty()) dim_ = vector.size();
    if (vector.size() != dim_)
        throw ConfigError("embedding for '" + std::string(word) + "' has dimension " + std::to_string(vector.size()) +
                          ", expected " + std::to_string(dim_));
    auto key = to_lower(word);
    if (index_.count(key)) return;
    double norm = 0.0;
    for (const double v : vector) norm += v * v;
    index_.emplace(key, words_.size());
    words_.push_back(std::move(key));
    data_.insert(data_.end(), vector.begin(), vector.end());
    norms_.push_back(std::sqrt(norm));
}

std::optional<std::size_t> EmbeddingTable::index(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double EmbeddingTable::cosine(std::size_t a, std::size_t b) const {
    if (norms_[a] == 0.0 || norms_[b] == 0.0) return 0.0;
    const auto va = vector(a), vb = vector(b);
    double dot = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) dot += va[k] * vb[k];
    return dot / (norms_[a] * norms_[b]);
}

EmbeddingTable EmbeddingTable::parse(std::string_view content) {
    EmbeddingTable table;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> declared_dim;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_ws(line);
        if (fields.empty()) continue;
        if (line_no == 1 && fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) {
            declared_dim = static_cast<std::size_t>(std::stoul(std::string(fields[1])));
            table.dim_ = *declared_dim;
            continue;
        }
        if (fields.size() < 2) throw ParseError("embedding line needs a word and at least one value", line_no);
        std::vector<double> vec;
        vec.reserve(fields.size() - 1);
        for (std::size_t k = 1; k < fields.size(); ++k) {
            double v;
            if (!parse_double(fields[k], v)) throw ParseError("bad number '" + std::string(fields[k]) + "'", line_no);
            vec.push_back(v);
        }
        try {
            table.add(fields[0], std::move(vec));
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) { return parse(read_file(path)); }

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("cosine of vectors with different dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void SynonymConfig::validate() const {
    if (n < 1) throw ConfigError("synonym count N must be at least 1");
    if (!(delta >= -1.0 && delta <= 1.0)) throw ConfigError("synonym threshold must lie in [-1, 1]");
}

std::vector<Candidate> synonym_candidates(std::string_view t, const EmbeddingTable& table, const SynonymConfig& cfg) {
    cfg.validate();
    const auto ti = table.index(t);
    if (!ti) return {};
    std::vector<std::pair<double, std::size_t>> hits;
    for (std::size_t w = 0; w < table.size(); ++w) {
        if (w == *ti) continue;
        const double c = table.cosine(*ti, w);
        if (c > cfg.delta) hits.emplace_back(c, w);
    }
    const auto better = [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return table.words()[a.second] < table.words()[b.second];
    };
    if (hits.size() > cfg.n) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(cfg.n), hits.end(), better);
        hits.resize(cfg.n);
    } else {
        std::sort(hits.begin(), hits.end(), better);
    }
    std::vector<Candidate> out;
    out.reserve(hits.size());
    for (const auto& [c, w] : hits) out.push_back({table.words()[w], c, Generator::synonym});
    return out;
}

// ---------------------------------------------------------------------------
// Heuristics

Candidate heuristic_leet(std::string_view t) {
    std::string out(t);
    for (auto& ch : out) {
        switch (ch) {
        case 'a': case 'A': ch = '4'; break;
        case 'e': case 'E': ch = '3'; break;
        case 'i': case 'I': ch = '1'; break;
        case 'l': case 'L': ch = '1'; break;
        case 'o': case 'O': ch = '0'; break;
        case 's': case 'S': ch = '5'; break;
        case 't': case 'T': ch = '7'; break;
        default: break;
        }
    }
    return {std::move(out), 1.0, Generator::leet};
}

Candidate heuristic_flip(std::string_view t) {
    auto chars = utf8_chars(t);
    const std::size_t n = chars.size();
    if (n >= 4) {
        const std::size_t mid = (n + 1) / 2;
        std::swap(chars[mid - 1], chars[mid]);
    }
    std::string out;
    for (const auto& c : chars) out += c;
    return {std::move(out), 1.0, Generator::flip};
}

std::size_t space_split_index(std::string_view t, std::uint64_t seed) {
    const std::size_t n = utf8_length(t);
    if (n < 2) return 0;
    Rng rng(seed);
    return 1 + static_cast<std::size_t>(rng.uniform_index(n - 1));
}

Candidate heuristic_space_at(std::string_view t, std::size_t split) {
    const auto chars = utf8_chars(t);
    if (chars.size() < 2 || split == 0 || split >= chars.size()) return {std::string(t), 1.0, Generator::space};
    std::string out;
    for (std::size_t i = 0; i < chars.size(); ++i) {
        if (i == split) out += ' ';
        out += chars[i];
    }
    return {std::move(out), 1.0, Generator::space};
}

Candidate heuristic_space(std::string_view t, std::uint64_t seed) {
    return heuristic_space_at(t, space_split_index(t, seed));
}

// ---------------------------------------------------------------------------
// Lexicons

Lexicon parse_lexicon(std::string_view content) {
    Lexicon lex;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("expected word<TAB>syn1,syn2,...", line_no);
        const auto word = to_lower(trim(std::string_view(line).substr(0, tab)));
        auto& entry = lex[word];
        for (const auto& s : split_on(std::string_view(line).substr(tab + 1), ',')) {
            auto syn = trim(s);
            if (!syn.empty()) entry.push_back(std::move(syn));
        }
    }
    return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) { return parse_lexicon(read_file(path)); }

std::vector<Candidate> lexicon_candidates(std::string_view t, const Lexicon& lexicon) {
    const auto it = lexicon.find(std::string(t));
    if (it == lexicon.end()) return {};
    std::vector<Candidate> out;
    std::set<std::string> seen;
    for (const auto& syn : it->second) {
        if (!seen.insert(syn).second) continue;
        out.push_back({syn, 1.0 / static_cast<double>(out.size() + 1), Generator::lexicon});
    }
    return out;
}

std::vector<Candidate> sanitize(std::span<const Candidate> candidates, std::string_view t) {
    const auto target = to_lower(t);
    std::vector<std::string> forms = {target, target + "s", target + "es"};
    if (target.size() > 1 && target.ends_with('s')) forms.push_back(target.substr(0, target.size() - 1));
    if (target.size() > 2 && target.ends_with("es")) forms.push_back(target.substr(0, target.size() - 2));

    std::vector<Candidate> out;
    std::set<std::string> seen;
    for (const auto& c : candidates) {
        if (c.token.empty() || utf8_length(c.token) <= 1) continue;
        if (c.token.starts_with("##")) continue;
        const auto folded = to_lower(c.token);
        if (std::find(forms.begin(), forms.end(), folded) != forms.end()) continue;
        if (!seen.insert(folded).second) continue;
        out.push_back(c);
    }
    return out;
}

PosLexicon parse_pos_lexicon(std::string_view content) {
    static const std::set<std::string> known = {"NOUN", "VERB", "ADJ", "ADV", "OTHER"};
    PosLexicon lex;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("expected word<TAB>TAG1|TAG2", line_no);
        auto& tags = lex[to_lower(trim(std::string_view(line).substr(0, tab)))];
        for (const auto& tag : split_on(std::string_view(line).substr(tab + 1), '|')) {
            const auto t = trim(tag);
            if (!known.count(t)) throw ParseError("unknown POS tag '" + t + "'", line_no);
            tags.insert(t);
        }
    }
    return lex;
}

PosLexicon load_pos_lexicon(const std::filesystem::path& path) { return parse_pos_lexicon(read_file(path)); }

bool pos_filter(std::span<const std::string> tokens, std::size_t target_index, std::string_view candidate,
                const PosLexicon* lexicon) {
    if (!lexicon || target_index >= tokens.size()) return true;
    const auto t = lexicon->find(to_lower(tokens[target_index]));
    const auto c = lexicon->find(to_lower(candidate));
    if (t == lexicon->end() || c == lexicon->end()) return true;
    return std::any_of(t->second.begin(), t->second.end(), [&](const std::string& tag) { return c->second.count(tag); });
}

// ---------------------------------------------------------------------------
// Similarity

namespace {

std::vector<double> mean_vector(std::span<const std::string> tokens, const EmbeddingTable& table) {
    std::vector<double> mean(table.dim(), 0.0);
    if (tokens.empty()) return mean;
    for (const auto& t : tokens) {
        const auto i = table.index(t);
        if (!i) continue;
        const auto v = table.vector(*i);
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += v[k];
    }
    for (auto& m : mean) m /= static_cast<double>(tokens.size());
    return mean;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace

double sentence_similarity(std::span<const std::string> a, std::span<const std::string> b,
                           const EmbeddingTable& table) {
    if (table.dim() == 0) return 0.0;
    return cosine(mean_vector(a, table), mean_vector(b, table));
}

void ContextualEncoding::validate() const {
    if (vectors.size() != attention.size()) throw ConfigError("encoding has mismatched vector and attention counts");
    double sum = 0.0;
    for (const double w : attention) {
        if (!(w >= 0.0)) throw ConfigError("attention weights must be non-negative");
        sum += w;
    }
    if (!attention.empty() && std::abs(sum - 1.0) > 1e-6) throw ConfigError("attention weights must sum to 1");
}

double contextual_sim(const ContextualEncoding& original, const ContextualEncoding& perturbed) {
    if (original.vectors.size() != perturbed.vectors.size())
        throw ConfigError("contextual similarity needs encodings of equal length");
    if (original.attention.size() != original.vectors.size())
        throw ConfigError("encoding has mismatched vector and attention counts");
    double sim = 0.0;
    for (std::size_t i = 0; i < original.vectors.size(); ++i)
        sim += original.attention[i] * cosine(original.vectors[i], perturbed.vectors[i]);
    return sim;
}

ContextualEncoding static_encoding(std::span<const std::string> tokens, const EmbeddingTable& table) {
    const std::size_t dim = std::max<std::size_t>(table.dim(), 1);
    ContextualEncoding enc;
    for (const auto& t : tokens) {
        if (const auto i = table.index(t)) {
            const auto v = table.vector(*i);
            enc.vectors.emplace_back(v.begin(), v.end());
            continue;
        }
        Rng rng(fnv1a(t));
        std::vector<double> v(dim);
        double norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        for (auto& x : v) x /= std::sqrt(norm);
        enc.vectors.push_back(std::move(v));
    }
    enc.attention.assign(tokens.size(), tokens.empty() ? 0.0 : 1.0 / static_cast<double>(tokens.size()));
    return enc;
}

} // namespace veil
