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

#include "veil/harness.hpp"

#include "veil/error.hpp"
#include "veil/rng.hpp"

#include <toml.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace veil {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Runs f(0..n-1) on a small worker pool. Results must be written by index so
// the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad(std::string s, std::size_t width, bool left = false) {
    if (s.size() >= width) return s;
    const std::string fill(width - s.size(), ' ');
    return left ? s + fill : fill + s;
}

} // namespace

// ---------------------------------------------------------------- fixture

void FixtureSpec::validate() const {
    if (n_docs < 2) throw ConfigError("fixture needs at least 2 documents");
    if (filler_vocab < 1 || filler_cluster < 1) throw ConfigError("fixture filler vocabulary must be positive");
    if (markers_per_class < 1) throw ConfigError("fixture needs at least one marker per class");
    if (dim < 2) throw ConfigError("fixture embedding dimension must be at least 2");
    if (min_length < 1 || min_length > max_length) throw ConfigError("fixture length range is empty");
    if (min_markers < 1 || min_markers > max_markers || max_markers > min_length)
        throw ConfigError("fixture marker range must lie within [1, min_length]");
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("fixture noise rate must lie in [0, 1]");
    if (!(spread >= 0.0)) throw ConfigError("fixture spread must be non-negative");
    if (labels.size() != 2 || labels[0] == labels[1]) throw ConfigError("fixture needs exactly two distinct labels");
}

namespace {

bool shares_ngram(const std::string& a, const std::string& b, std::size_t n) {
    if (a.size() < n || b.size() < n) return false;
    for (std::size_t i = 0; i + n <= a.size(); ++i)
        if (b.find(a.substr(i, n)) != std::string::npos) return true;
    return false;
}

} // namespace

Fixture make_fixture(const FixtureSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::set<std::string> used;

    static constexpr char kConsonants[] = "bcdfghjklmnprstvwz";
    static constexpr char kVowels[] = "aeiou";
    auto fresh_word = [&](const std::string* avoid) {
        for (;;) {
            const std::size_t len = 5 + rng.uniform_index(5);
            std::string w;
            for (std::size_t i = 0; i < len; ++i)
                w += (i % 2 == 0) ? kConsonants[rng.uniform_index(sizeof kConsonants - 1)]
                                  : kVowels[rng.uniform_index(sizeof kVowels - 1)];
            if (used.count(w)) continue;
            if (avoid && shares_ngram(w, *avoid, 4)) continue;
            used.insert(w);
            return w;
        }
    };
    auto unit = [&] {
        std::vector<double> v(spec.dim);
        double norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
        return v;
    };
    auto around = [&](const std::vector<double>& center) {
        auto v = unit();
        for (std::size_t k = 0; k < spec.dim; ++k) v[k] = center[k] + spec.spread * v[k];
        return v;
    };

    Fixture fx;
    fx.embeddings = EmbeddingTable(spec.dim);

    std::vector<double> center;
    for (std::size_t i = 0; i < spec.filler_vocab; ++i) {
        if (i % spec.filler_cluster == 0) center = unit();
        fx.fillers.push_back(fresh_word(nullptr));
        fx.embeddings.add(fx.fillers.back(), around(center));
    }
    for (const auto& label : spec.labels) {
        auto& markers = fx.markers[label];
        for (std::size_t m = 0; m < spec.markers_per_class; ++m) {
            center = unit();
            const auto marker = fresh_word(nullptr);
            markers.push_back(marker);
            fx.embeddings.add(marker, around(center));
            auto& variants = fx.variants[marker];
            for (std::size_t v = 0; v < spec.variants_per_marker; ++v) {
                variants.push_back(fresh_word(&marker));
                fx.embeddings.add(variants.back(), around(center));
            }
        }
    }

    std::vector<Document> docs;
    docs.reserve(spec.n_docs);
    for (std::size_t i = 0; i < spec.n_docs; ++i) {
        const std::size_t li = rng.bernoulli(0.5) ? 1 : 0;
        const auto& own = fx.markers[spec.labels[li]];
        const auto& other = fx.markers[spec.labels[1 - li]];
        const std::size_t len = spec.min_length + rng.uniform_index(spec.max_length - spec.min_length + 1);
        const std::size_t m = spec.min_markers + rng.uniform_index(spec.max_markers - spec.min_markers + 1);
        Tokens tokens;
        for (std::size_t k = 0; k + m < len; ++k) tokens.push_back(fx.fillers[rng.uniform_index(fx.fillers.size())]);
        for (std::size_t k = 0; k < m; ++k) {
            const auto pos = rng.uniform_index(tokens.size() + 1);
            tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), own[rng.uniform_index(own.size())]);
        }
        if (rng.bernoulli(spec.noise_rate)) {
            // Overwrite a filler so the length stays in range.
            std::vector<std::size_t> filler_pos;
            for (std::size_t k = 0; k < tokens.size(); ++k)
                if (std::find(own.begin(), own.end(), tokens[k]) == own.end()) filler_pos.push_back(k);
            const auto& noise = other[rng.uniform_index(other.size())];
            if (!filler_pos.empty()) tokens[filler_pos[rng.uniform_index(filler_pos.size())]] = noise;
        }
        std::string raw;
        for (const auto& t : tokens) {
            if (!raw.empty()) raw += ' ';
            raw += t;
        }
        docs.push_back(Document::from_text("fx-" + std::to_string(i), std::move(raw), spec.labels[li]));
    }
    fx.corpus = LabeledCorpus(std::move(docs));
    return fx;
}

void write_embeddings(const EmbeddingTable& table, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << table.size() << ' ' << table.dim() << '\n';
    char buf[32];
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.words()[i];
        for (const double v : table.vector(i)) {
            std::snprintf(buf, sizeof buf, " %.9f", v);
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------- models

std::string to_string(PlanMode m) { return m == PlanMode::transfer ? "transfer" : "robustness"; }

ModelSpec model_preset(std::string_view name) {
    ModelSpec s;
    s.preset = std::string(name);
    if (name == "logreg") {
        s.kind = ModelKind::logreg;
        s.features.word_ngrams = {1, 2};
    } else if (name == "ngram") {
        // Word uni/bigrams plus character 6-grams, sublinear tf-idf, linear SVM.
        s.kind = ModelKind::linsvm;
        s.features.word_ngrams = {1, 2};
        s.features.char_ngrams = 6;
        s.features.sublinear_tf = true;
        s.train.loss = Loss::squared_hinge;
    } else if (name == "svm") {
        s.kind = ModelKind::linsvm;
        s.features.word_ngrams = {1, 3};
        s.features.weighting = Weighting::binary;
        s.train.loss = Loss::squared_hinge;
    } else if (name == "nbsvm") {
        s.kind = ModelKind::nbsvm;
        s.features.word_ngrams = {1, 2};
        s.features.weighting = Weighting::binary;
        s.train.loss = Loss::squared_hinge;
    } else if (name == "nb_multinomial") {
        s.kind = ModelKind::nb_multinomial;
    } else if (name == "nb_gaussian") {
        s.kind = ModelKind::nb_gaussian;
    } else {
        throw ConfigError("unknown model preset '" + std::string(name) +
                          "' (expected logreg, ngram, svm, nbsvm, nb_multinomial or nb_gaussian)");
    }
    return s;
}

ClassifierModel train_model(const LabeledCorpus& corpus, const ModelSpec& spec) {
    if (spec.kind == ModelKind::nbsvm) return train_nbsvm(corpus, spec.features, spec.train);
    return train(corpus, spec.features, spec.train, spec.kind);
}

// ---------------------------------------------------------------- plan parsing

namespace {

class TomlReader {
public:
    TomlReader(const toml::table& t, std::string where) : t_(t), where_(std::move(where)) {}

    std::string key(std::string_view k) const { return where_.empty() ? std::string(k) : where_ + "." + std::string(k); }

    void only(std::initializer_list<std::string_view> allowed) const {
        for (const auto& [k, v] : t_) {
            if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end())
                throw ConfigError(key(k.str()) + ": unknown key");
        }
    }

    const toml::node* node(std::string_view k) const { return t_.get(k); }

    std::optional<std::string> str(std::string_view k) const {
        const auto* n = node(k);
        if (!n) return std::nullopt;
        if (!n->is_string()) throw ConfigError(key(k) + ": expected a string");
        return n->as_string()->get();
    }
    std::optional<std::int64_t> integer(std::string_view k) const {
        const auto* n = node(k);
        if (!n) return std::nullopt;
        if (!n->is_integer()) throw ConfigError(key(k) + ": expected an integer");
        return n->as_integer()->get();
    }
    std::optional<std::size_t> count(std::string_view k) const {
        const auto v = integer(k);
        if (v && *v < 0) throw ConfigError(key(k) + ": must be non-negative");
        if (!v) return std::nullopt;
        return static_cast<std::size_t>(*v);
    }
    std::optional<double> real(std::string_view k) const {
        const auto* n = node(k);
        if (!n) return std::nullopt;
        if (n->is_floating_point()) return n->as_floating_point()->get();
        if (n->is_integer()) return static_cast<double>(n->as_integer()->get());
        throw ConfigError(key(k) + ": expected a number");
    }
    std::optional<bool> boolean(std::string_view k) const {
        const auto* n = node(k);
        if (!n) return std::nullopt;
        if (!n->is_boolean()) throw ConfigError(key(k) + ": expected true or false");
        return n->as_boolean()->get();
    }
    std::optional<std::vector<std::string>> strings(std::string_view k) const {
        const auto* n = node(k);
        if (!n) return std::nullopt;
        const auto* arr = n->as_array();
        if (!arr) throw ConfigError(key(k) + ": expected an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const auto* s = arr->get(i)->as_string();
            if (!s) throw ConfigError(key(k) + "[" + std::to_string(i) + "]: expected a string");
            out.push_back(s->get());
        }
        return out;
    }
    std::optional<NgramRange> range(std::string_view k) const {
        const auto* n = node(k);
        if (!n) return std::nullopt;
        const auto* arr = n->as_array();
        if (!arr || arr->size() != 2 || !arr->get(0)->is_integer() || !arr->get(1)->is_integer())
            throw ConfigError(key(k) + ": expected [lo, hi]");
        return NgramRange{static_cast<int>(arr->get(0)->as_integer()->get()),
                          static_cast<int>(arr->get(1)->as_integer()->get())};
    }
    const toml::table* table(std::string_view k) const {
        const auto* n = node(k);
        if (!n) return nullptr;
        if (!n->is_table()) throw ConfigError(key(k) + ": expected a table");
        return n->as_table();
    }

    // Wraps a module-level validation error with this key path.
    template <class F>
    auto guard(std::string_view k, F&& f) const {
        try {
            return f();
        } catch (const ConfigError& e) {
            throw ConfigError(key(k) + ": " + e.what());
        }
    }

private:
    const toml::table& t_;
    std::string where_;
};

constexpr std::array<std::string_view, 11> kModelKeys = {
    "model", "C", "loss", "class_weight", "epochs", "word_ngrams", "char_ngrams", "weighting", "sublinear_tf",
    "min_df", "l2_normalize"};

ModelSpec read_model(const TomlReader& r, const std::string& preset_name) {
    auto spec = r.guard("model", [&] { return model_preset(preset_name); });
    if (auto v = r.real("C")) spec.train.C = *v;
    if (auto v = r.str("loss")) spec.train.loss = r.guard("loss", [&] { return parse_loss(*v); });
    if (auto v = r.str("class_weight"))
        spec.train.class_weight = r.guard("class_weight", [&] { return parse_class_weight(*v); });
    if (auto v = r.integer("epochs")) spec.train.epochs = static_cast<int>(*v);
    if (auto v = r.range("word_ngrams")) spec.features.word_ngrams = *v;
    if (auto v = r.integer("char_ngrams")) {
        if (*v == 0) spec.features.char_ngrams.reset();
        else spec.features.char_ngrams = static_cast<int>(*v);
    }
    if (auto v = r.str("weighting")) spec.features.weighting = r.guard("weighting", [&] { return parse_weighting(*v); });
    if (auto v = r.boolean("sublinear_tf")) spec.features.sublinear_tf = *v;
    if (auto v = r.integer("min_df")) spec.features.min_df = static_cast<int>(*v);
    if (auto v = r.boolean("l2_normalize")) spec.features.l2_normalize = *v;
    r.guard("model", [&] {
        spec.features.validate();
        spec.train.validate();
        return 0;
    });
    return spec;
}

CorpusRef read_corpus(const TomlReader& r, const fs::path& base) {
    const auto path = r.str("corpus");
    if (!path) throw ConfigError(r.key("corpus") + ": required");
    CorpusRef ref;
    ref.path = fs::path(*path).is_absolute() ? fs::path(*path) : base / *path;
    if (auto f = r.str("format")) ref.format = r.guard("format", [&] { return parse_corpus_format(*f); });
    return ref;
}

std::optional<fs::path> read_path(const TomlReader& r, std::string_view k, const fs::path& base) {
    const auto v = r.str(k);
    if (!v) return std::nullopt;
    return fs::path(*v).is_absolute() ? fs::path(*v) : base / *v;
}

} // namespace

ExperimentPlan parse_plan(std::string_view text, const fs::path& base_dir,
                          const std::optional<std::string>& default_encoder_endpoint) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw ConfigError("line " + std::to_string(e.source().begin.line) + ": " + std::string(e.description()));
    }
    const TomlReader top(root, "");
    top.only({"mode", "seed", "sample", "target", "substitute", "attack"});

    ExperimentPlan plan;
    if (auto m = top.str("mode")) {
        if (*m == "transfer") plan.mode = PlanMode::transfer;
        else if (*m == "robustness") plan.mode = PlanMode::robustness;
        else throw ConfigError("mode: expected \"transfer\" or \"robustness\"");
    }
    if (auto s = top.integer("seed")) {
        if (*s < 0) throw ConfigError("seed: must be non-negative");
        plan.seed = static_cast<std::uint64_t>(*s);
    }

    if (const auto* t = top.table("sample")) {
        const TomlReader r(*t, "sample");
        r.only({"size", "train_fraction", "positive_label"});
        if (auto v = r.count("size")) plan.sample.size = *v;
        if (auto v = r.real("train_fraction")) plan.sample.train_fraction = *v;
        plan.sample.positive_label = r.str("positive_label");
        if (plan.sample.size < 1) throw ConfigError("sample.size: must be at least 1");
        if (!(plan.sample.train_fraction > 0.0 && plan.sample.train_fraction < 1.0))
            throw ConfigError("sample.train_fraction: must lie strictly between 0 and 1");
    }

    const auto* target = top.table("target");
    if (!target) throw ConfigError("target: required");
    {
        const TomlReader r(*target, "target");
        std::vector<std::string_view> allowed = {"corpus", "format", "models"};
        allowed.insert(allowed.end(), kModelKeys.begin(), kModelKeys.end());
        for (const auto& [k, v] : *target)
            if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end() || k.str() == "model")
                throw ConfigError(r.key(k.str()) + ": unknown key");
        plan.target.corpus = read_corpus(r, base_dir);
        const auto models = r.strings("models").value_or(std::vector<std::string>{"logreg"});
        if (models.empty()) throw ConfigError("target.models: must name at least one model");
        for (const auto& m : models) plan.target.models.push_back(read_model(r, m));
        for (auto& m : plan.target.models) m.train.seed = plan.seed;
    }

    if (const auto* subs = top.table("substitute")) {
        for (const auto& [name, node] : *subs) {
            const std::string where = "substitute." + std::string(name.str());
            if (!node.is_table()) throw ConfigError(where + ": expected a table");
            const TomlReader r(*node.as_table(), where);
            std::vector<std::string_view> allowed = {"corpus", "format"};
            allowed.insert(allowed.end(), kModelKeys.begin(), kModelKeys.end());
            for (const auto& [k, v] : *node.as_table())
                if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end())
                    throw ConfigError(r.key(k.str()) + ": unknown key");
            SubstituteSpec s;
            s.name = std::string(name.str());
            s.corpus = read_corpus(r, base_dir);
            s.model = read_model(r, r.str("model").value_or("logreg"));
            s.model.train.seed = plan.seed;
            plan.substitutes.push_back(std::move(s));
        }
    }

    if (const auto* attacks = top.table("attack")) {
        for (const auto& [name, node] : *attacks) {
            const std::string where = "attack." + std::string(name.str());
            if (!node.is_table()) throw ConfigError(where + ": expected a table");
            const TomlReader r(*node.as_table(), where);
            r.only({"generators", "embeddings", "lexicon", "pos_lexicon", "encoder_endpoint", "checks", "k",
                    "min_score", "n", "delta", "top_k", "similarity_ranker", "sim_threshold", "max_samples",
                    "sanitize", "mark_token", "dropout_p", "original_context"});
            AttackSpec a;
            a.name = std::string(name.str());
            a.config = plan.mode == PlanMode::robustness ? AttackConfig::augmentation() : AttackConfig{};
            auto& c = a.config;
            if (auto g = r.strings("generators")) {
                c.generators.clear();
                for (const auto& s : *g) c.generators.push_back(r.guard("generators", [&] { return parse_generator(s); }));
                a.identity = c.generators.empty();
            }
            a.embeddings = read_path(r, "embeddings", base_dir);
            a.lexicon = read_path(r, "lexicon", base_dir);
            a.pos_lexicon = read_path(r, "pos_lexicon", base_dir);
            a.encoder_endpoint = r.str("encoder_endpoint");
            if (auto v = r.boolean("checks")) c.checks = *v;
            if (auto v = r.count("k")) c.k = *v;
            if (auto v = r.real("min_score")) c.min_score = *v;
            if (auto v = r.count("n")) c.synonyms.n = *v;
            if (auto v = r.real("delta")) c.synonyms.delta = *v;
            if (auto v = r.count("top_k")) c.top_k_per_word = *v;
            if (auto v = r.str("similarity_ranker"))
                c.similarity_ranker = r.guard("similarity_ranker", [&] { return parse_similarity_ranker(*v); });
            if (auto v = r.real("sim_threshold")) c.sim_threshold = *v;
            if (auto v = r.count("max_samples")) c.max_samples = *v;
            if (auto v = r.boolean("sanitize")) c.sanitize = *v;
            if (auto v = r.str("mark_token")) {
                if (v->empty()) c.mark_token.reset();
                else c.mark_token = *v;
            }
            if (auto v = r.real("dropout_p")) c.dropout_p = *v;
            if (auto v = r.boolean("original_context")) c.original_context = *v;
            c.seed = plan.seed;
            const bool needs_encoder = std::any_of(c.generators.begin(), c.generators.end(), is_external);
            if (needs_encoder && !a.encoder_endpoint) a.encoder_endpoint = default_encoder_endpoint;
            if (!a.identity) {
                r.guard("generators", [&] {
                    c.validate();
                    return 0;
                });
                const bool synonym = std::count(c.generators.begin(), c.generators.end(), Generator::synonym) > 0;
                if (synonym && !a.embeddings) throw ConfigError(r.key("embeddings") + ": required by the synonym generator");
                const bool lexicon = std::count(c.generators.begin(), c.generators.end(), Generator::lexicon) > 0;
                if (lexicon && !a.lexicon) throw ConfigError(r.key("lexicon") + ": required by the lexicon generator");
                if (needs_encoder && !a.encoder_endpoint)
                    throw ConfigError(r.key("encoder_endpoint") + ": required by external generators");
            }
            plan.attacks.push_back(std::move(a));
        }
    }

    if (plan.mode == PlanMode::robustness) {
        if (plan.attacks.empty()) throw ConfigError("attack: robustness plans need at least one augmenter");
    } else if (plan.substitutes.empty() && !plan.attacks.empty()) {
        throw ConfigError("substitute: transfer plans with attacks need at least one substitute");
    }
    return plan;
}

ExperimentPlan load_plan(const fs::path& path, const std::optional<std::string>& default_encoder_endpoint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open plan '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_plan(ss.str(), path.parent_path(), default_encoder_endpoint);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

namespace {

json to_json(const ModelSpec& m) {
    json f = {{"word_ngrams", {m.features.word_ngrams.lo, m.features.word_ngrams.hi}},
              {"char_ngrams", m.features.char_ngrams ? json(*m.features.char_ngrams) : json(nullptr)},
              {"weighting", to_string(m.features.weighting)},
              {"sublinear_tf", m.features.sublinear_tf},
              {"min_df", m.features.min_df},
              {"l2_normalize", m.features.l2_normalize},
              {"ignored_tokens", m.features.ignored_tokens}};
    json t = {{"C", m.train.C},
              {"loss", to_string(m.train.loss)},
              {"class_weight", to_string(m.train.class_weight)},
              {"epochs", m.train.epochs},
              {"learning_rate", m.train.learning_rate},
              {"lr_decay", m.train.lr_decay},
              {"seed", m.train.seed}};
    return {{"preset", m.preset}, {"kind", to_string(m.kind)}, {"features", f}, {"train", t}};
}

json to_json(const CorpusRef& c) {
    return {{"path", c.path.generic_string()}, {"format", c.format == CorpusFormat::jsonl ? "jsonl" : "tsv"}};
}

} // namespace

json to_json(const ExperimentPlan& plan) {
    json subs = json::array();
    for (const auto& s : plan.substitutes)
        subs.push_back({{"name", s.name}, {"corpus", to_json(s.corpus)}, {"model", to_json(s.model)}});
    json models = json::array();
    for (const auto& m : plan.target.models) models.push_back(to_json(m));
    json attacks = json::array();
    for (const auto& a : plan.attacks) {
        json j = {{"name", a.name}, {"identity", a.identity}, {"config", to_json(a.config)}};
        auto opt_path = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); };
        j["embeddings"] = opt_path(a.embeddings);
        j["lexicon"] = opt_path(a.lexicon);
        j["pos_lexicon"] = opt_path(a.pos_lexicon);
        j["encoder_endpoint"] = a.encoder_endpoint ? json(*a.encoder_endpoint) : json(nullptr);
        attacks.push_back(std::move(j));
    }
    return {{"mode", to_string(plan.mode)},
            {"seed", plan.seed},
            {"sample",
             {{"size", plan.sample.size},
              {"train_fraction", plan.sample.train_fraction},
              {"positive_label", plan.sample.positive_label ? json(*plan.sample.positive_label) : json(nullptr)}}},
            {"target", {{"corpus", to_json(plan.target.corpus)}, {"models", models}}},
            {"substitutes", subs},
            {"attacks", attacks}};
}

// ---------------------------------------------------------------- resources

AttackResources LoadedResources::view() const {
    AttackResources r;
    if (embeddings) r.embeddings = &*embeddings;
    if (lexicon) r.lexicon = &*lexicon;
    if (pos) r.pos = &*pos;
    if (encoder) r.encoder = &*encoder;
    return r;
}

LoadedResources load_resources(const AttackSpec& spec) {
    LoadedResources r;
    if (spec.embeddings) r.embeddings = EmbeddingTable::load(*spec.embeddings);
    if (spec.lexicon) r.lexicon = load_lexicon(*spec.lexicon);
    if (spec.pos_lexicon) r.pos = load_pos_lexicon(*spec.pos_lexicon);
    if (spec.encoder_endpoint) r.encoder.emplace(*spec.encoder_endpoint);
    return r;
}

// ---------------------------------------------------------------- shared run setup

namespace {

struct Split {
    LabeledCorpus train;
    LabeledCorpus test;
    std::vector<Document> sample;  // tail of the test split
    std::string positive;
};

Split prepare_target(const ExperimentPlan& plan, std::vector<std::string>& warnings) {
    const auto corpus = load_corpus(plan.target.corpus.path, plan.target.corpus.format);
    Split s;
    std::tie(s.train, s.test) = split(corpus, SplitSpec{plan.sample.train_fraction, plan.seed, true});
    if (plan.sample.size > s.test.size())
        throw ConfigError("sample.size: " + std::to_string(plan.sample.size) + " exceeds the " +
                          std::to_string(s.test.size()) + "-document test split");
    const auto& docs = s.test.documents();
    s.sample.assign(docs.end() - static_cast<std::ptrdiff_t>(plan.sample.size), docs.end());
    s.positive = plan.sample.positive_label.value_or(corpus.labels().back());
    if (!corpus.label_index(s.positive))
        throw ConfigError("sample.positive_label: '" + s.positive + "' is not a label of the target corpus");

    std::set<std::string> train_authors;
    for (const auto& d : s.train.documents()) train_authors.insert(d.author());
    std::size_t shared = 0;
    for (const auto& d : s.sample) shared += train_authors.count(d.author());
    if (shared)
        warnings.push_back(std::to_string(shared) + " sample documents share an author key with the target training split");
    return s;
}

std::vector<std::string> gold_of(const std::vector<Document>& docs) {
    std::vector<std::string> out;
    for (const auto& d : docs) out.push_back(d.label.value_or(""));
    return out;
}

std::vector<std::string> predict_all(const ClassifierModel& f, const std::vector<Tokens>& docs) {
    std::vector<std::string> out(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) out[i] = f.predict(docs[i]);
    return out;
}

std::vector<Tokens> tokens_of(const std::vector<Document>& docs) {
    std::vector<Tokens> out;
    for (const auto& d : docs) out.push_back(d.tokens);
    return out;
}

} // namespace

// ---------------------------------------------------------------- transfer

const TransferRow* TransferMatrix::find(std::string_view substitute, std::string_view attack) const {
    for (const auto& r : rows)
        if (r.substitute == substitute && r.attack == attack) return &r;
    return nullptr;
}

TransferMatrix run_transfer(const ExperimentPlan& plan) {
    if (plan.mode != PlanMode::transfer) throw ConfigError("mode: run_transfer needs a transfer plan");
    TransferMatrix m;
    m.plan = to_json(plan);
    auto s = prepare_target(plan, m.warnings);
    m.positive_label = s.positive;
    m.sample_size = s.sample.size();

    std::vector<ClassifierModel> targets;
    for (const auto& spec : plan.target.models) {
        m.columns.push_back(spec.preset);
        try {
            targets.push_back(train_model(s.train, spec));
        } catch (const Error& e) {
            throw Error("target model '" + spec.preset + "': " + e.what());
        }
        targets.back().set_role(ModelRole::target);
    }

    const auto gold = gold_of(s.sample);
    const auto originals = tokens_of(s.sample);

    auto score_row = [&](TransferRow& row, const std::vector<Tokens>& attacked) {
        for (const auto& f : targets)
            row.cells.push_back(evaluate(predict_all(f, attacked), gold, s.positive, originals, attacked));
    };

    TransferRow none{"-", "none", {}, std::nullopt, 0.0, 0};
    score_row(none, originals);
    m.rows.push_back(std::move(none));

    std::map<std::string, LabeledCorpus> corpora;
    for (const auto& sub : plan.substitutes) {
        const auto key = sub.corpus.path.string();
        if (!corpora.count(key)) {
            const auto c = load_corpus(sub.corpus.path, sub.corpus.format);
            corpora.emplace(key, split(c, SplitSpec{plan.sample.train_fraction, plan.seed, true}).first);
        }
        const auto& sub_train = corpora.at(key);

        std::set<std::string> sample_ids;
        for (const auto& d : s.sample) sample_ids.insert(d.author());
        std::size_t shared = 0;
        for (const auto& d : sub_train.documents()) shared += sample_ids.count(d.author());
        if (shared)
            m.warnings.push_back("substitute '" + sub.name + "': " + std::to_string(shared) +
                                 " training documents share an author key with the attack sample");

        std::optional<ClassifierModel> fprime;
        try {
            fprime.emplace(train_model(sub_train, sub.model));
        } catch (const Error& e) {
            throw Error("cell (substitute=" + sub.name + "): " + e.what());
        }
        fprime->set_role(ModelRole::substitute);
        for (const auto& g : gold)
            if (!fprime->label_index(g))
                throw ConfigError("substitute." + sub.name + ": label '" + g + "' of the sample is unknown to the substitute");

        for (const auto& atk : plan.attacks) {
            TransferRow row{sub.name, atk.name, {}, std::nullopt, 0.0, 0};
            std::vector<Tokens> attacked(s.sample.size());
            std::vector<char> flipped(s.sample.size(), 0);
            for (const auto& f : targets) f.reset_query_count();
            try {
                if (atk.identity) {
                    attacked = originals;
                } else {
                    const auto loaded = load_resources(atk);
                    const auto res = loaded.view();
                    std::vector<std::vector<std::string>> warns(s.sample.size());
                    parallel_for(s.sample.size(), [&](std::size_t i) {
                        auto r = obfuscate(*fprime, s.sample[i], gold[i], atk.config, res);
                        attacked[i] = std::move(r.adv.tokens);
                        flipped[i] = r.success;
                        warns[i] = std::move(r.warnings);
                    });
                    std::set<std::string> unique;
                    for (const auto& w : warns) unique.insert(w.begin(), w.end());
                    for (const auto& w : unique) m.warnings.push_back("attack '" + atk.name + "': " + w);
                }
            } catch (const Error& e) {
                throw Error("cell (substitute=" + sub.name + ", attack=" + atk.name + "): " + e.what());
            }
            for (const auto& f : targets) row.target_queries_during_attack += f.query_count();
            row.success_rate = static_cast<double>(std::count(flipped.begin(), flipped.end(), 1)) /
                               static_cast<double>(s.sample.size());
            row.substitute_report = evaluate(predict_all(*fprime, attacked), gold, s.positive, originals, attacked);
            score_row(row, attacked);
            m.rows.push_back(std::move(row));
        }
    }
    return m;
}

// ---------------------------------------------------------------- robustness

namespace {

std::vector<Tokens> perturb_positives(const ClassifierModel& f, const std::vector<Document>& docs,
                                      const std::string& positive, const AttackConfig& cfg,
                                      const AttackResources& res) {
    std::vector<std::vector<PerturbedDocument>> per(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) {
        if (docs[i].label == positive) per[i] = augment(f, docs[i], positive, cfg, res);
    });
    std::vector<Tokens> out;
    for (const auto& samples : per)
        for (const auto& p : samples) out.push_back(p.rendered_tokens());
    return out;
}

double tpr_all_positive(const ClassifierModel& f, const std::vector<Tokens>& docs, const std::string& positive) {
    std::size_t hit = 0;
    for (const auto& d : docs) hit += f.predict(d) == positive;
    return static_cast<double>(hit) / static_cast<double>(docs.size());
}

} // namespace

RobustnessReport run_robustness(const ExperimentPlan& plan) {
    if (plan.mode != PlanMode::robustness) throw ConfigError("mode: run_robustness needs a robustness plan");
    RobustnessReport rep;
    rep.plan = to_json(plan);
    auto s = prepare_target(plan, rep.warnings);
    rep.positive_label = s.positive;
    rep.sample_size = s.sample.size();
    for (const auto& a : plan.attacks) rep.augmenters.push_back(a.name);

    std::vector<std::string> markers;
    for (const auto& a : plan.attacks)
        if (a.config.mark_token) markers.push_back(*a.config.mark_token);

    std::vector<LoadedResources> loaded;
    for (const auto& a : plan.attacks) loaded.push_back(load_resources(a));

    const auto gold = gold_of(s.sample);
    const auto originals = tokens_of(s.sample);
    std::vector<Document> pos_sample;
    for (const auto& d : s.sample)
        if (d.label == s.positive) pos_sample.push_back(d);
    if (pos_sample.empty()) throw ConfigError("sample: contains no '" + s.positive + "' documents");
    std::vector<Document> train_pos;
    for (const auto& d : s.train.documents())
        if (d.label == s.positive) train_pos.push_back(d);

    for (const auto& base_spec : plan.target.models) {
        auto spec = base_spec;
        for (const auto& mk : markers) spec.features.ignored_tokens.push_back(mk);
        RobustnessModelReport mr;
        mr.model = spec.preset;
        const auto f = train_model(s.train, spec);
        mr.tpr_original = tpr_all_positive(f, tokens_of(pos_sample), s.positive);

        // Perturbed test positives per augmenter, built against f, unmarked.
        std::vector<std::vector<Tokens>> xprime;
        for (std::size_t a = 0; a < plan.attacks.size(); ++a) {
            if (plan.attacks[a].identity) {
                xprime.push_back(tokens_of(pos_sample));
                continue;
            }
            auto cfg = plan.attacks[a].config;
            cfg.mark_token.reset();
            try {
                xprime.push_back(perturb_positives(f, pos_sample, s.positive, cfg, loaded[a].view()));
            } catch (const Error& e) {
                throw Error("augmenter '" + plan.attacks[a].name + "': " + e.what());
            }
            if (xprime.back().empty())
                rep.warnings.push_back("augmenter '" + plan.attacks[a].name + "' produced no perturbed test positives");
        }
        for (const auto& xp : xprime)
            mr.tpr_perturbed.push_back(xp.empty() ? std::nullopt
                                                  : std::optional<double>(tpr_all_positive(f, xp, s.positive)));

        // Row models: plain f, then f retrained on train plus augmented positives.
        std::vector<const ClassifierModel*> row_models{&f};
        std::vector<ClassifierModel> augmented_models;
        augmented_models.reserve(plan.attacks.size());
        mr.rows.push_back("plain");
        mr.augmented_samples.push_back(0);
        for (std::size_t a = 0; a < plan.attacks.size(); ++a) {
            const auto& atk = plan.attacks[a];
            std::vector<std::vector<PerturbedDocument>> per(train_pos.size());
            if (!atk.identity) {
                try {
                    const auto res = loaded[a].view();
                    parallel_for(train_pos.size(),
                                 [&](std::size_t i) { per[i] = augment(f, train_pos[i], s.positive, atk.config, res); });
                } catch (const Error& e) {
                    throw Error("augmenter '" + atk.name + "': " + e.what());
                }
            }
            std::vector<Document> docs = s.train.documents();
            std::size_t added = 0;
            for (const auto& samples : per)
                for (const auto& p : samples) {
                    Document d;
                    d.id = p.source_id + "#aug" + std::to_string(p.sample_rank);
                    d.tokens = p.rendered_tokens();
                    d.raw = p.text();
                    d.label = s.positive;
                    docs.push_back(std::move(d));
                    ++added;
                }
            mr.rows.push_back(atk.name);
            mr.augmented_samples.push_back(added);
            if (added == 0) {
                row_models.push_back(&f);
                continue;
            }
            try {
                augmented_models.push_back(train_model(LabeledCorpus(std::move(docs)), spec));
            } catch (const Error& e) {
                throw Error("augmenter '" + atk.name + "' retraining: " + e.what());
            }
            row_models.push_back(&augmented_models.back());
        }

        for (const auto* g : row_models) {
            mr.clean.push_back(evaluate(predict_all(*g, originals), gold, s.positive, originals, originals));
            std::vector<double> row;
            for (std::size_t c = 0; c < xprime.size(); ++c) {
                if (xprime[c].empty()) {
                    row.push_back(0.0);
                    continue;
                }
                row.push_back(tpr_all_positive(*g, xprime[c], s.positive) - *mr.tpr_perturbed[c]);
            }
            mr.delta_tpr.push_back(std::move(row));
        }
        rep.models.push_back(std::move(mr));
    }
    return rep;
}

// ---------------------------------------------------------------- reports

json to_json(const TransferRow& row) {
    json cells = json::array();
    for (const auto& c : row.cells) cells.push_back(to_json(c));
    json j = {{"substitute", row.substitute},
              {"attack", row.attack},
              {"cells", cells},
              {"success_rate", row.success_rate},
              {"target_queries_during_attack", row.target_queries_during_attack}};
    j["substitute_report"] = row.substitute_report ? to_json(*row.substitute_report) : json(nullptr);
    return j;
}

json to_json(const TransferMatrix& m) {
    json rows = json::array();
    for (const auto& r : m.rows) rows.push_back(to_json(r));
    return {{"kind", "transfer"},       {"columns", m.columns}, {"rows", rows},
            {"positive_label", m.positive_label}, {"sample_size", m.sample_size}, {"warnings", m.warnings},
            {"plan", m.plan}};
}

json to_json(const RobustnessReport& r) {
    json models = json::array();
    for (const auto& m : r.models) {
        json clean = json::array();
        for (const auto& c : m.clean) clean.push_back(to_json(c));
        json perturbed = json::array();
        for (const auto& t : m.tpr_perturbed) perturbed.push_back(t ? json(*t) : json(nullptr));
        models.push_back({{"model", m.model},
                          {"tpr_original", m.tpr_original},
                          {"tpr_perturbed", perturbed},
                          {"rows", m.rows},
                          {"clean", clean},
                          {"delta_tpr", m.delta_tpr},
                          {"augmented_samples", m.augmented_samples}});
    }
    return {{"kind", "robustness"},     {"augmenters", r.augmenters}, {"positive_label", r.positive_label},
            {"sample_size", r.sample_size}, {"models", models},       {"warnings", r.warnings},
            {"plan", r.plan}};
}

std::string format_transfer(const TransferMatrix& m) {
    std::size_t w_sub = 10, w_atk = 8;
    for (const auto& r : m.rows) {
        w_sub = std::max(w_sub, r.substitute.size());
        w_atk = std::max(w_atk, r.attack.size());
    }
    std::ostringstream out;
    out << "post-attack accuracy (n=" << m.sample_size << ", positive=" << m.positive_label << ")\n";
    out << pad("substitute", w_sub, true) << "  " << pad("attack", w_atk, true);
    for (const auto& c : m.columns) out << "  " << pad(c, std::max<std::size_t>(c.size(), 7));
    out << "  " << pad("f'_acc", 7) << "  " << pad("success", 7) << '\n';
    for (const auto& r : m.rows) {
        out << pad(r.substitute, w_sub, true) << "  " << pad(r.attack, w_atk, true);
        for (std::size_t c = 0; c < m.columns.size(); ++c)
            out << "  " << pad(fmt(r.cells[c].accuracy), std::max<std::size_t>(m.columns[c].size(), 7));
        out << "  " << pad(r.substitute_report ? fmt(r.substitute_report->accuracy) : "-", 7) << "  "
            << pad(r.attack == "none" && r.substitute == "-" ? "-" : fmt(r.success_rate), 7) << '\n';
    }
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
        out << "\ntarget " << m.columns[c] << '\n';
        std::vector<std::pair<std::string, EvalReport>> rows;
        for (const auto& r : m.rows) rows.emplace_back(r.substitute + "/" + r.attack, r.cells[c]);
        out << format_table(rows);
    }
    return out.str();
}

std::string format_robustness(const RobustnessReport& r) {
    std::ostringstream out;
    out << "robustness (n=" << r.sample_size << ", positive=" << r.positive_label << ")\n";
    for (const auto& m : r.models) {
        out << "\nmodel " << m.model << "\n";
        out << "exp1 f(X'_pos) tpr: original " << fmt(m.tpr_original);
        for (std::size_t a = 0; a < r.augmenters.size(); ++a)
            out << ", " << r.augmenters[a] << ' ' << (m.tpr_perturbed[a] ? fmt(*m.tpr_perturbed[a]) : "-");
        out << "\nexp2 f_aug(X_test)\n";
        std::vector<std::pair<std::string, EvalReport>> rows;
        for (std::size_t i = 0; i < m.rows.size(); ++i) rows.emplace_back(m.rows[i], m.clean[i]);
        out << format_table(rows);
        out << "exp3 delta tpr f_aug(X'_test)\n";
        std::size_t w = 8;
        for (const auto& row : m.rows) w = std::max(w, row.size());
        out << pad("train\\test", std::max<std::size_t>(w, 10), true);
        for (const auto& a : r.augmenters) out << "  " << pad(a, std::max<std::size_t>(a.size(), 7));
        out << "  " << pad("samples", 7) << '\n';
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            out << pad(m.rows[i], std::max<std::size_t>(w, 10), true);
            for (std::size_t c = 0; c < r.augmenters.size(); ++c) {
                const double d = m.delta_tpr[i][c];
                out << "  " << pad((d >= 0 ? "+" : "") + fmt(d), std::max<std::size_t>(r.augmenters[c].size(), 7));
            }
            out << "  " << pad(std::to_string(m.augmented_samples[i]), 7) << '\n';
        }
    }
    return out.str();
}

namespace {

std::vector<fs::path> write_pair(const json& j, const std::string& table, const fs::path& dir, const std::string& stem) {
    fs::create_directories(dir);
    const auto jp = dir / (stem + ".json");
    const auto tp = dir / (stem + ".txt");
    {
        std::ofstream out(jp, std::ios::binary);
        if (!out) throw Error("cannot write '" + jp.string() + "'");
        out << j.dump(2) << '\n';
    }
    {
        std::ofstream out(tp, std::ios::binary);
        if (!out) throw Error("cannot write '" + tp.string() + "'");
        out << table;
    }
    return {jp, tp};
}

} // namespace

std::vector<fs::path> write_report(const TransferMatrix& m, const fs::path& dir) {
    return write_pair(to_json(m), format_transfer(m), dir, "transfer");
}

std::vector<fs::path> write_report(const RobustnessReport& r, const fs::path& dir) {
    return write_pair(to_json(r), format_robustness(r), dir, "robustness");
}

} // namespace veil
