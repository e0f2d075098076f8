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

#include "veil/text.hpp"

#include "veil/error.hpp"
#include "veil/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace veil {

namespace {

using json = nlohmann::json;

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_alnum(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Decodes one code point at `pos`; returns (code point, byte length). Invalid
// sequences decode as a single byte so the tokenizer never stalls.
std::pair<char32_t, std::size_t> decode(std::string_view s, std::size_t pos) {
    const auto c = static_cast<unsigned char>(s[pos]);
    std::size_t len = 1;
    char32_t cp = c;
    if (c >= 0xF0 && c <= 0xF4) {
        len = 4;
        cp = c & 0x07;
    } else if (c >= 0xE0) {
        len = 3;
        cp = c & 0x0F;
    } else if (c >= 0xC2 && c < 0xE0) {
        len = 2;
        cp = c & 0x1F;
    } else {
        return {cp, 1};
    }
    if (pos + len > s.size()) return {c, 1};
    for (std::size_t k = 1; k < len; ++k) {
        const auto cc = static_cast<unsigned char>(s[pos + k]);
        if ((cc & 0xC0) != 0x80) return {c, 1};
        cp = (cp << 6) | (cc & 0x3F);
    }
    return {cp, len};
}

bool is_emoji(char32_t cp) {
    return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) ||
           (cp >= 0x2B00 && cp <= 0x2BFF) || cp == 0x200D || cp == 0xFE0F;
}

bool is_unicode_punct(char32_t cp) {
    return (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x3000 && cp <= 0x303F) || cp == 0x00A1 ||
           cp == 0x00BF || cp == 0x00AB || cp == 0x00BB;
}

enum class CharClass { word, emoji, punct };

CharClass classify(std::string_view s, std::size_t pos, std::size_t* len) {
    const auto c = static_cast<unsigned char>(s[pos]);
    if (c < 0x80) {
        *len = 1;
        return (is_ascii_alnum(c) || c == '_') ? CharClass::word : CharClass::punct;
    }
    const auto [cp, n] = decode(s, pos);
    *len = n;
    if (is_emoji(cp)) return CharClass::emoji;
    if (is_unicode_punct(cp)) return CharClass::punct;
    return CharClass::word;
}

bool word_at(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) return false;
    std::size_t len;
    return classify(s, pos, &len) == CharClass::word;
}

bool starts_url(std::string_view s, std::size_t pos) {
    const auto rest = s.substr(pos);
    return rest.starts_with("http://") || rest.starts_with("https://") || rest.starts_with("www.");
}

bool is_placeholder(std::string_view s) {
    if (s.size() < 3 || s.front() != '<' || s.back() != '>') return false;
    return std::all_of(s.begin() + 1, s.end() - 1,
                       [](unsigned char c) { return is_ascii_alnum(c) || c == '_'; });
}

void tokenize_chunk(std::string_view s, Tokens& out) {
    std::size_t i = 0;
    while (i < s.size()) {
        if (starts_url(s, i)) return;
        const char c = s[i];
        if (c == '@' && word_at(s, i + 1)) {
            ++i;
            while (word_at(s, i)) ++i;
            out.emplace_back("<user>");
            continue;
        }
        if (c == '#' && word_at(s, i + 1)) {
            out.emplace_back("#");
            ++i;
            continue;
        }
        std::size_t len;
        const CharClass cls = classify(s, i, &len);
        const std::size_t start = i;
        if (cls == CharClass::word) {
            i += len;
            while (i < s.size()) {
                if (word_at(s, i)) {
                    std::size_t l;
                    classify(s, i, &l);
                    i += l;
                    continue;
                }
                const char d = s[i];
                // keep internal apostrophes, hyphens, and decimal separators
                const bool joiner = (d == '\'' || d == '-') && word_at(s, i + 1);
                const bool decimal = (d == '.' || d == ',') && is_digit(s[i - 1]) &&
                                     i + 1 < s.size() && is_digit(s[i + 1]);
                if (!joiner && !decimal) break;
                ++i;
            }
        } else if (cls == CharClass::emoji) {
            i += len;
            while (i < s.size()) {
                std::size_t l;
                if (classify(s, i, &l) != CharClass::emoji) break;
                i += l;
            }
        } else {
            i += len;
            while (i < s.size()) {
                const char d = s[i];
                if ((d == '@' || d == '#') && word_at(s, i + 1)) break;
                if (starts_url(s, i)) break;
                std::size_t l;
                if (classify(s, i, &l) != CharClass::punct) break;
                i += l;
            }
        }
        out.emplace_back(s.substr(start, i - start));
    }
}

std::string join(const Tokens& tokens, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += sep;
        out += tokens[i];
    }
    return out;
}

std::optional<std::string> label_field(const json& record, std::size_t line) {
    const auto it = record.find("label");
    if (it == record.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    if (it->is_boolean()) return it->get<bool>() ? "true" : "false";
    throw ParseError("field \"label\" must be a string", line);
}

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        fields.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return fields;
}

} // namespace

std::string Document::text() const { return join(tokens, " "); }

std::string Document::author() const {
    const auto colon = id.find(':');
    return colon == std::string::npos ? id : id.substr(0, colon);
}

Document Document::from_text(std::string id, std::string raw, std::optional<std::string> label) {
    Document d;
    d.id = std::move(id);
    d.tokens = tokenize(raw);
    d.raw = std::move(raw);
    d.label = std::move(label);
    return d;
}

LabeledCorpus::LabeledCorpus(std::vector<Document> documents) : documents_(std::move(documents)) {
    std::set<std::string> labels;
    for (const auto& d : documents_)
        if (d.label) labels.insert(*d.label);
    labels_.assign(labels.begin(), labels.end());
}

LabeledCorpus::LabeledCorpus(std::vector<Document> documents, std::vector<std::string> labels)
    : documents_(std::move(documents)), labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
    for (const auto& d : documents_)
        if (d.label && !label_index(*d.label))
            throw ConfigError("document '" + d.id + "' has label '" + *d.label +
                              "' outside the corpus label set");
}

std::optional<std::size_t> LabeledCorpus::label_index(std::string_view label) const {
    const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<std::size_t> LabeledCorpus::label_counts() const {
    std::vector<std::size_t> counts(labels_.size(), 0);
    for (const auto& d : documents_)
        if (d.label) ++counts[*label_index(*d.label)];
    return counts;
}

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "jsonl") return CorpusFormat::jsonl;
    if (name == "tsv") return CorpusFormat::tsv;
    throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected jsonl or tsv)");
}

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) break;
        const std::string chunk = to_lower(text.substr(start, i - start));
        if (is_placeholder(chunk))
            out.push_back(chunk);
        else
            tokenize_chunk(chunk, out);
    }
    return out;
}

LabeledCorpus parse_corpus(std::string_view content, CorpusFormat format) {
    std::vector<Document> docs;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;

    if (format == CorpusFormat::jsonl) {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            json record;
            try {
                record = json::parse(line);
            } catch (const json::parse_error& e) {
                throw ParseError(std::string("invalid json: ") + e.what(), line_no);
            }
            if (!record.is_object()) throw ParseError("record is not a json object", line_no);
            const auto text = record.find("text");
            if (text == record.end() || !text->is_string())
                throw ParseError("missing string field \"text\"", line_no);
            std::string id = std::to_string(docs.size());
            if (const auto it = record.find("id"); it != record.end()) {
                if (it->is_string())
                    id = it->get<std::string>();
                else if (it->is_number_integer())
                    id = std::to_string(it->get<long long>());
                else
                    throw ParseError("field \"id\" must be a string", line_no);
            }
            docs.push_back(Document::from_text(std::move(id), text->get<std::string>(),
                                               label_field(record, line_no)));
        }
        return LabeledCorpus(std::move(docs));
    }

    std::optional<std::size_t> text_col, label_col, id_col;
    std::size_t n_cols = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            const auto header = split_tabs(line);
            n_cols = header.size();
            for (std::size_t c = 0; c < header.size(); ++c) {
                if (header[c] == "text") text_col = c;
                else if (header[c] == "label") label_col = c;
                else if (header[c] == "id") id_col = c;
            }
            if (!text_col) throw ParseError("tsv header lacks a \"text\" column", line_no);
            continue;
        }
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != n_cols)
            throw ParseError("expected " + std::to_string(n_cols) + " tab-separated fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        std::optional<std::string> label;
        if (label_col && !fields[*label_col].empty()) label = fields[*label_col];
        std::string id = id_col ? fields[*id_col] : std::to_string(docs.size());
        docs.push_back(Document::from_text(std::move(id), fields[*text_col], std::move(label)));
    }
    if (line_no == 0) throw ParseError("empty tsv file (header required)", 0);
    return LabeledCorpus(std::move(docs));
}

LabeledCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_corpus(buf.str(), format);
}

void write_corpus_jsonl(const LabeledCorpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    for (const auto& d : corpus.documents()) {
        json record = {{"id", d.id}, {"text", d.raw.empty() ? d.text() : d.raw}};
        if (d.label) record["label"] = *d.label;
        out << record.dump() << '\n';
    }
}

LabeledCorpus chunk_by_author(const LabeledCorpus& corpus, std::size_t max_docs_per_chunk) {
    if (max_docs_per_chunk == 0) throw ConfigError("max_docs_per_chunk must be positive");

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<const Document*>> by_author;
    for (const auto& d : corpus.documents()) {
        auto [it, inserted] = by_author.try_emplace(d.author());
        if (inserted) order.push_back(d.author());
        auto& docs = it->second;
        if (!docs.empty() && docs.front()->label != d.label)
            throw ConfigError("author '" + d.author() + "' has documents with different labels");
        docs.push_back(&d);
    }

    std::vector<Document> chunks;
    for (const auto& author : order) {
        const auto& docs = by_author.at(author);
        for (std::size_t start = 0, n = 0; start < docs.size(); start += max_docs_per_chunk, ++n) {
            const std::size_t end = std::min(docs.size(), start + max_docs_per_chunk);
            Document chunk;
            chunk.id = author + ":" + std::to_string(n);
            chunk.label = docs[start]->label;
            for (std::size_t k = start; k < end; ++k) {
                if (k > start) chunk.raw += '\n';
                chunk.raw += docs[k]->raw;
                chunk.tokens.insert(chunk.tokens.end(), docs[k]->tokens.begin(), docs[k]->tokens.end());
            }
            chunks.push_back(std::move(chunk));
        }
    }
    return LabeledCorpus(std::move(chunks), corpus.labels());
}

std::vector<std::size_t> stratified_train_counts(const std::vector<std::size_t>& label_counts,
                                                 double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    std::size_t total = 0;
    for (const auto c : label_counts) {
        if (c < 2)
            throw ConfigError("stratified split needs at least 2 documents per label");
        total += c;
    }
    // Largest-remainder allocation of round(fraction * N); ties go to the
    // lexicographically first label.
    const auto target = static_cast<std::size_t>(std::llround(train_fraction * total));
    std::vector<std::size_t> counts(label_counts.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < label_counts.size(); ++i) {
        const double exact = train_fraction * label_counts[i];
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        assigned += counts[i];
        remainders.emplace_back(exact - counts[i], i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first + 1e-12; });
    for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r, ++assigned)
        ++counts[remainders[r].second];
    for (std::size_t i = 0; i < counts.size(); ++i)
        counts[i] = std::clamp<std::size_t>(counts[i], 1, label_counts[i] - 1);
    return counts;
}

std::pair<LabeledCorpus, LabeledCorpus> split(const LabeledCorpus& corpus, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    const auto& docs = corpus.documents();
    Rng rng(spec.seed);
    std::vector<bool> in_train(docs.size(), false);

    if (spec.stratified) {
        std::vector<std::vector<std::size_t>> members(corpus.labels().size());
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (!docs[i].label)
                throw ConfigError("stratified split requires every document to be labelled");
            members[*corpus.label_index(*docs[i].label)].push_back(i);
        }
        std::vector<std::size_t> sizes;
        for (const auto& m : members) sizes.push_back(m.size());
        const auto train_counts = stratified_train_counts(sizes, spec.train_fraction);
        for (std::size_t l = 0; l < members.size(); ++l) {
            rng.shuffle(members[l]);
            for (std::size_t k = 0; k < train_counts[l]; ++k) in_train[members[l][k]] = true;
        }
    } else {
        if (docs.size() < 2) throw ConfigError("split needs at least 2 documents");
        std::vector<std::size_t> idx(docs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng.shuffle(idx);
        auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * docs.size()));
        n_train = std::clamp<std::size_t>(n_train, 1, docs.size() - 1);
        for (std::size_t k = 0; k < n_train; ++k) in_train[idx[k]] = true;
    }

    std::vector<Document> train, test;
    for (std::size_t i = 0; i < docs.size(); ++i) (in_train[i] ? train : test).push_back(docs[i]);
    return {LabeledCorpus(std::move(train), corpus.labels()),
            LabeledCorpus(std::move(test), corpus.labels())};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::set<std::string> vocabulary(const LabeledCorpus& corpus) {
    std::set<std::string> v;
    for (const auto& d : corpus.documents()) v.insert(d.tokens.begin(), d.tokens.end());
    return v;
}

std::vector<std::string> utf8_chars(std::string_view s) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < s.size();) {
        const auto len = decode(s, i).second;
        out.emplace_back(s.substr(i, len));
        i += len;
    }
    return out;
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); i += decode(s, i).second) ++n;
    return n;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

} // namespace veil
