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

#include "veil/cli.hpp"

#include "veil/error.hpp"
#include "veil/harness.hpp"
#include "veil/server.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace veil {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    bool quiet = false;
    std::string output_dir;
};

struct TrainOpts {
    std::string corpus, format = "jsonl", classifier = "logreg", preset, word_ngrams, weighting, loss,
        class_weight, grid, out;
    int char_ngrams = -1;
    bool sublinear = false;
    double c = -1.0;
    int epochs = -1;
    double eval_split = 0.0;
    int inner_folds = 10, outer_folds = 3;
};

struct AttackOpts {
    std::string model, input, format = "jsonl", label, embeddings, lexicon, pos_lexicon, encoder, similarity = "none",
        out;
    std::vector<std::string> generators;
    double delta = 0.7, sim_threshold = 0.84, min_score = 0.0, dropout = -1.0;
    std::size_t n = 50, k = 50, top_k = kDefaultExternalTopK;
    bool checks = false, sanitize = false, original_context = false;
};

struct AugmentOpts {
    std::string model, input, format = "jsonl", label, embeddings, lexicon, pos_lexicon, encoder, out;
    std::string mark_token = kAugmentMarker;
    std::vector<std::string> generators;
    double delta = 0.7, min_score = kAugmentMinScore, dropout = kAugmentDropout;
    std::size_t n = 50, k = 50, top_k = kDefaultExternalTopK, max_samples = 5;
    bool no_sanitize = false;
};

struct EvalOpts {
    std::string plan;
};

struct ServeOpts {
    std::string model, embeddings, lexicon, pos_lexicon, encoder, host = "127.0.0.1", static_dir;
    int port = 8080;
    long ttl = 3600;
};

struct FixtureOpts {
    std::size_t n_docs = 1000, markers = 12, variants = 5, max_markers = 3;
    double noise = 0.0;
    std::string out = "fixture";
};

fs::path resolve(const Globals& g, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute() || g.output_dir.empty()) return path;
    return fs::path(g.output_dir) / path;
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const fs::path& p, const std::string& content) {
    ensure_parent(p);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + p.string() + "'");
}

NgramRange parse_range(const std::string& s) {
    const auto sep = s.find_first_of(",-:");
    try {
        if (sep == std::string::npos) {
            const int v = std::stoi(s);
            return {v, v};
        }
        return {std::stoi(s.substr(0, sep)), std::stoi(s.substr(sep + 1))};
    } catch (const std::exception&) {
        throw ConfigError("--word-ngrams: expected LO,HI, got '" + s + "'");
    }
}

std::optional<std::string> encoder_endpoint(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("VEIL_ENCODER_ENDPOINT"); env && *env) return std::string(env);
    return std::nullopt;
}

std::vector<Generator> parse_generators(const std::vector<std::string>& names) {
    std::vector<Generator> out;
    for (const auto& n : names) out.push_back(parse_generator(n));
    if (out.empty()) out.push_back(Generator::synonym);
    return out;
}

struct Resources {
    std::optional<EmbeddingTable> embeddings;
    std::optional<Lexicon> lexicon;
    std::optional<PosLexicon> pos;
    std::optional<EncoderClient> encoder;

    AttackResources view() const {
        AttackResources r;
        if (embeddings) r.embeddings = &*embeddings;
        if (lexicon) r.lexicon = &*lexicon;
        if (pos) r.pos = &*pos;
        if (encoder) r.encoder = &*encoder;
        return r;
    }
};

Resources load_attack_resources(const std::vector<Generator>& gens, const std::string& embeddings,
                                const std::string& lexicon, const std::string& pos, const std::string& encoder_flag) {
    Resources r;
    const auto uses = [&](Generator g) { return std::find(gens.begin(), gens.end(), g) != gens.end(); };
    if (uses(Generator::synonym) && embeddings.empty())
        throw ConfigError("--embeddings is required by the synonym generator");
    if (uses(Generator::lexicon) && lexicon.empty()) throw ConfigError("--lexicon is required by the lexicon generator");
    const bool external = std::any_of(gens.begin(), gens.end(), is_external);
    const auto endpoint = encoder_endpoint(encoder_flag);
    if (external && !endpoint)
        throw ConfigError("external generators need --encoder-endpoint or VEIL_ENCODER_ENDPOINT");
    if (!embeddings.empty()) r.embeddings = EmbeddingTable::load(embeddings);
    if (!lexicon.empty()) r.lexicon = load_lexicon(lexicon);
    if (!pos.empty()) r.pos = load_pos_lexicon(pos);
    if (endpoint) r.encoder.emplace(*endpoint);
    return r;
}

std::string label_for(const Document& d, const std::string& flag) {
    if (!flag.empty()) return flag;
    if (!d.label) throw ConfigError("document '" + d.id + "' has no label; pass --label");
    return *d.label;
}

// ---------------------------------------------------------------- train

int cmd_train(const Globals& g, const TrainOpts& o, std::ostream& out) {
    const auto format = parse_corpus_format(o.format);
    ModelSpec spec;
    if (!o.preset.empty()) {
        spec = model_preset(o.preset);
    } else {
        spec.kind = parse_model_kind(o.classifier);
        if (spec.kind == ModelKind::linsvm || spec.kind == ModelKind::nbsvm) spec.train.loss = Loss::squared_hinge;
        spec.preset = o.classifier;
    }
    if (!o.word_ngrams.empty()) spec.features.word_ngrams = parse_range(o.word_ngrams);
    if (o.char_ngrams == 0) spec.features.char_ngrams.reset();
    else if (o.char_ngrams > 0) spec.features.char_ngrams = o.char_ngrams;
    if (!o.weighting.empty()) spec.features.weighting = parse_weighting(o.weighting);
    if (o.sublinear) spec.features.sublinear_tf = true;
    if (o.c > 0) spec.train.C = o.c;
    if (!o.loss.empty()) spec.train.loss = parse_loss(o.loss);
    if (!o.class_weight.empty()) spec.train.class_weight = parse_class_weight(o.class_weight);
    if (o.epochs > 0) spec.train.epochs = o.epochs;
    spec.train.seed = g.seed;
    spec.features.validate();
    spec.train.validate();
    if (o.eval_split < 0.0 || o.eval_split >= 1.0) throw ConfigError("--eval-split must lie in [0, 1)");
    if (!o.grid.empty() && o.grid != "default") throw ConfigError("--grid: only 'default' is supported");
    const auto corpus = load_corpus(o.corpus, format);

    LabeledCorpus train_part = corpus, held_out;
    if (o.eval_split > 0.0) std::tie(train_part, held_out) = split(corpus, SplitSpec{1.0 - o.eval_split, g.seed, true});

    json summary = {{"corpus", o.corpus}, {"n_train", train_part.size()}};
    std::optional<ClassifierModel> model;
    if (!o.grid.empty()) {
        if (o.grid != "default") throw ConfigError("--grid: only 'default' is supported");
        GridSpec grid;
        grid.candidates = default_svm_grid();
        for (auto& c : grid.candidates) c.train.seed = g.seed;
        grid.inner_folds = o.inner_folds;
        grid.outer_folds = o.outer_folds;
        const auto kind = o.preset.empty() && o.classifier == "logreg" ? ModelKind::linsvm : spec.kind;
        auto r = grid_search(train_part, grid, kind);
        const auto& best = grid.candidates[r.best_index];
        char line[256];
        std::snprintf(line, sizeof line,
                      "best: word_ngrams=%d-%d weighting=%s class_weight=%s loss=%s C=%g inner_f1=%.4f\n",
                      best.features.word_ngrams.lo, best.features.word_ngrams.hi,
                      to_string(best.features.weighting).c_str(), to_string(best.train.class_weight).c_str(),
                      to_string(best.train.loss).c_str(), best.train.C, r.scores[r.best_index]);
        if (!g.quiet) out << line;
        double outer = 0.0;
        for (const double s : r.outer_scores) outer += s;
        if (!r.outer_scores.empty()) outer /= static_cast<double>(r.outer_scores.size());
        if (!g.quiet) out << "nested outer f1: " << outer << "\n";
        summary["grid"] = {{"best_index", r.best_index}, {"scores", r.scores}, {"outer_scores", r.outer_scores}};
        model.emplace(std::move(r.best));
    } else {
        model.emplace(train_model(train_part, spec));
    }
    if (!held_out.empty()) {
        std::vector<std::string> preds, gold;
        for (const auto& d : held_out.documents()) {
            preds.push_back(model->predict(d));
            gold.push_back(d.label.value_or(""));
        }
        const auto& labels = corpus.labels();
        const double f1 = labels.size() == 2 ? f1_score(preds, gold, labels.back()) : macro_f1(preds, gold, labels);
        const double acc = accuracy(preds, gold);
        if (!g.quiet) out << "held-out (n=" << held_out.size() << "): f1=" << f1 << " accuracy=" << acc << "\n";
        summary["held_out"] = {{"n", held_out.size()}, {"f1", f1}, {"accuracy", acc}};
    }
    const auto path = resolve(g, o.out);
    ensure_parent(path);
    save_model(*model, path);
    write_text(path.string() + ".summary.json", summary.dump(2) + "\n");
    if (!g.quiet) out << "wrote " << path.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- attack

int cmd_attack(const Globals& g, const AttackOpts& o, std::ostream& out, std::ostream& err) {
    AttackConfig cfg;
    cfg.generators = parse_generators(o.generators);
    cfg.synonyms.n = o.n;
    cfg.synonyms.delta = o.delta;
    cfg.k = o.k;
    cfg.top_k_per_word = o.top_k;
    cfg.checks = o.checks;
    cfg.min_score = o.min_score;
    cfg.similarity_ranker = parse_similarity_ranker(o.similarity);
    cfg.sim_threshold = o.sim_threshold;
    cfg.sanitize = o.sanitize;
    cfg.original_context = o.original_context;
    if (o.dropout >= 0.0) cfg.dropout_p = o.dropout;
    cfg.seed = g.seed;
    cfg.validate();
    const auto res = load_attack_resources(cfg.generators, o.embeddings, o.lexicon, o.pos_lexicon, o.encoder);
    const auto model = load_model(o.model);
    const auto corpus = load_corpus(o.input, parse_corpus_format(o.format));
    if (!o.label.empty() && !model.label_index(o.label))
        throw ConfigError("--label '" + o.label + "' is not one of the model's labels");

    const auto path = resolve(g, o.out);
    std::string lines;
    std::size_t n = 0, successes = 0, changes = 0, before_correct = 0, after_correct = 0;
    double change_rate_sum = 0.0, meteor_sum = 0.0;
    std::set<std::string> warnings;
    for (const auto& d : corpus.documents()) {
        const auto y = label_for(d, o.label);
        before_correct += model.predict(d) == y;
        const auto r = obfuscate(model, d, y, cfg, res.view());
        ++n;
        successes += r.success;
        changes += r.change_count;
        after_correct += model.predict(r.adv.tokens) == y;
        const double cr = d.tokens.empty() ? 0.0 : change_rate(d.tokens, r.adv.tokens);
        const double mt = d.tokens.empty() ? 1.0 : meteor_lite(r.adv.tokens, d.tokens);
        change_rate_sum += cr;
        meteor_sum += mt;
        warnings.insert(r.warnings.begin(), r.warnings.end());
        json steps = json::array();
        for (const auto& s : r.steps) steps.push_back(to_json(s));
        json rec = to_json(r.adv);
        rec["label"] = y;
        rec["original_text"] = d.text();
        rec["success"] = r.success;
        rec["change_count"] = r.change_count;
        rec["change_rate"] = cr;
        rec["meteor"] = mt;
        rec["final_logits"] = r.final_logits;
        rec["steps"] = steps;
        rec["warnings"] = r.warnings;
        lines += rec.dump() + "\n";
    }
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    write_text(path, lines);
    const double dn = n ? static_cast<double>(n) : 1.0;
    json summary = {{"n", n},
                    {"success_rate", static_cast<double>(successes) / dn},
                    {"mean_changes", static_cast<double>(changes) / dn},
                    {"mean_change_rate", change_rate_sum / dn},
                    {"meteor_mean", meteor_sum / dn},
                    {"substitute_accuracy_before", static_cast<double>(before_correct) / dn},
                    {"substitute_accuracy_after", static_cast<double>(after_correct) / dn},
                    {"warnings", std::vector<std::string>(warnings.begin(), warnings.end())},
                    {"config", to_json(cfg)}};
    write_text(path.string() + ".summary.json", summary.dump(2) + "\n");
    if (!g.quiet)
        out << "attacked " << n << " documents: success_rate=" << summary["success_rate"].get<double>()
            << " mean_changes=" << summary["mean_changes"].get<double>() << "\nwrote " << path.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- augment

int cmd_augment(const Globals& g, const AugmentOpts& o, std::ostream& out) {
    AttackConfig cfg = AttackConfig::augmentation();
    cfg.generators = parse_generators(o.generators);
    cfg.synonyms.n = o.n;
    cfg.synonyms.delta = o.delta;
    cfg.k = o.k;
    cfg.top_k_per_word = o.top_k;
    cfg.min_score = o.min_score;
    cfg.max_samples = o.max_samples;
    cfg.sanitize = !o.no_sanitize;
    cfg.dropout_p = o.dropout;
    if (o.mark_token.empty()) cfg.mark_token.reset();
    else cfg.mark_token = o.mark_token;
    cfg.seed = g.seed;
    cfg.validate();
    const auto res = load_attack_resources(cfg.generators, o.embeddings, o.lexicon, o.pos_lexicon, o.encoder);
    const auto model = load_model(o.model);
    const auto corpus = load_corpus(o.input, parse_corpus_format(o.format));
    if (!o.label.empty() && !model.label_index(o.label))
        throw ConfigError("--label '" + o.label + "' is not one of the model's labels");

    const auto path = resolve(g, o.out);
    std::string lines;
    std::size_t n_samples = 0;
    for (const auto& d : corpus.documents()) {
        const auto y = label_for(d, o.label);
        for (const auto& p : augment(model, d, y, cfg, res.view())) {
            lines += to_json(p).dump() + "\n";
            ++n_samples;
        }
    }
    write_text(path, lines);
    if (!g.quiet)
        out << "wrote " << n_samples << " samples for " << corpus.size() << " documents to " << path.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const Globals& g, const EvalOpts& o, std::ostream& out, std::ostream& err) {
    const auto plan = load_plan(o.plan, encoder_endpoint(""));
    const fs::path dir = g.output_dir.empty() ? fs::path(".") : fs::path(g.output_dir);
    std::vector<fs::path> written;
    if (plan.mode == PlanMode::transfer) {
        const auto m = run_transfer(plan);
        for (const auto& w : m.warnings) err << "warning: " << w << "\n";
        written = write_report(m, dir);
        if (!g.quiet) out << format_transfer(m);
    } else {
        const auto r = run_robustness(plan);
        for (const auto& w : r.warnings) err << "warning: " << w << "\n";
        written = write_report(r, dir);
        if (!g.quiet) out << format_robustness(r);
    }
    if (!g.quiet)
        for (const auto& p : written) out << "wrote " << p.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- serve

std::atomic<SessionService*> g_serving{nullptr};

extern "C" void on_signal(int) {
    if (auto* s = g_serving.load()) s->stop();
}

int cmd_serve(const Globals& g, const ServeOpts& o, std::ostream& out, std::ostream& err) {
    if (o.model.empty()) {
        err << "error: serve needs --model\n";
        return kExitUsage;
    }
    if (o.port < 0 || o.port > 65535) throw ConfigError("--port must lie in [0, 65535]");
    if (o.ttl < 1) throw ConfigError("--ttl must be at least 1 second");
    ServerConfig cfg;
    auto model = load_model(o.model);
    model.set_role(ModelRole::substitute);
    cfg.model = std::make_shared<const ClassifierModel>(std::move(model));
    if (!o.embeddings.empty()) cfg.embeddings = std::make_shared<const EmbeddingTable>(EmbeddingTable::load(o.embeddings));
    if (!o.lexicon.empty()) cfg.lexicon = std::make_shared<const Lexicon>(load_lexicon(o.lexicon));
    if (!o.pos_lexicon.empty()) cfg.pos = std::make_shared<const PosLexicon>(load_pos_lexicon(o.pos_lexicon));
    if (const auto ep = encoder_endpoint(o.encoder)) cfg.encoder = std::make_shared<const EncoderClient>(*ep);
    if (!o.static_dir.empty()) cfg.static_dir = o.static_dir;
    cfg.ttl = std::chrono::seconds(o.ttl);
    cfg.seed = g.seed;

    SessionService service(std::move(cfg));
    if (!service.bind(o.host, o.port)) {
        err << "error: cannot bind " << o.host << ":" << o.port << "\n";
        return kExitRuntime;
    }
    if (!g.quiet) out << "listening on http://" << o.host << ":" << service.port() << std::endl;
    g_serving = &service;
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    service.serve();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    g_serving = nullptr;
    return kExitOk;
}

// ---------------------------------------------------------------- fixture

int cmd_fixture(const Globals& g, const FixtureOpts& o, std::ostream& out) {
    FixtureSpec spec;
    spec.n_docs = o.n_docs;
    spec.markers_per_class = o.markers;
    spec.variants_per_marker = o.variants;
    spec.max_markers = o.max_markers;
    spec.min_markers = std::min(spec.min_markers, o.max_markers);
    spec.noise_rate = o.noise;
    spec.seed = g.seed;
    const auto fx = make_fixture(spec);
    const auto stem = resolve(g, o.out);
    ensure_parent(stem);
    const fs::path corpus = stem.string() + ".jsonl", emb = stem.string() + ".vec", markers = stem.string() + ".markers.json";
    write_corpus_jsonl(fx.corpus, corpus);
    write_embeddings(fx.embeddings, emb);
    write_text(markers, json{{"markers", fx.markers}, {"variants", fx.variants}}.dump(2) + "\n");
    if (!g.quiet) out << "wrote " << corpus.string() << ", " << emb.string() << ", " << markers.string() << "\n";
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"veil: lexical-substitution obfuscation against text classifiers"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed for every stochastic step")->capture_default_str();
    app.add_flag("--quiet", g.quiet, "suppress progress output");
    app.add_option("--output-dir", g.output_dir, "directory for reports and relative --out paths");

    TrainOpts to;
    auto* train = app.add_subcommand("train", "train a classifier and write a model file");
    train->add_option("--corpus", to.corpus, "training corpus")->required();
    train->add_option("--format", to.format, "jsonl or tsv")->capture_default_str();
    train->add_option("--classifier", to.classifier, "logreg, linsvm, nb_multinomial, nb_gaussian or nbsvm")
        ->capture_default_str();
    train->add_option("--preset", to.preset, "logreg, ngram, svm, nbsvm, nb_multinomial or nb_gaussian");
    train->add_option("--word-ngrams", to.word_ngrams, "word n-gram range LO,HI");
    train->add_option("--char-ngrams", to.char_ngrams, "character n-gram length (0 disables)");
    train->add_option("--weighting", to.weighting, "binary or tfidf");
    train->add_flag("--sublinear-tf", to.sublinear, "use 1 + log(tf)");
    train->add_option("--c", to.c, "inverse regularization strength");
    train->add_option("--loss", to.loss, "log, hinge or squared_hinge");
    train->add_option("--class-weight", to.class_weight, "uniform or balanced");
    train->add_option("--epochs", to.epochs, "training epochs");
    train->add_option("--grid", to.grid, "grid search: 'default'");
    train->add_option("--inner-folds", to.inner_folds, "grid inner folds")->capture_default_str();
    train->add_option("--outer-folds", to.outer_folds, "grid outer folds")->capture_default_str();
    train->add_option("--eval-split", to.eval_split, "held-out fraction for reporting F1");
    train->add_option("--out", to.out, "model file to write")->required();

    AttackOpts ao;
    auto* attack = app.add_subcommand("attack", "obfuscate documents against a substitute model");
    attack->add_option("--model", ao.model, "substitute model file")->required();
    attack->add_option("--input", ao.input, "documents to attack")->required();
    attack->add_option("--format", ao.format, "jsonl or tsv")->capture_default_str();
    attack->add_option("--label", ao.label, "protected label (default: each document's label)");
    attack->add_option("--embeddings", ao.embeddings, "embedding table for the synonym generator");
    attack->add_option("--lexicon", ao.lexicon, "synonym lexicon");
    attack->add_option("--pos-lexicon", ao.pos_lexicon, "part-of-speech lexicon for --checks");
    attack->add_option("--encoder-endpoint", ao.encoder, "external encoder URL");
    attack->add_option("--generator", ao.generators, "candidate generator (repeatable)");
    attack->add_option("--delta", ao.delta, "synonym cosine threshold")->capture_default_str();
    attack->add_option("--n", ao.n, "synonym candidates per word")->capture_default_str();
    attack->add_option("--k", ao.k, "maximum number of target words")->capture_default_str();
    attack->add_option("--top-k", ao.top_k, "external/lexicon candidates per word")->capture_default_str();
    attack->add_option("--min-score", ao.min_score, "minimum omission score of a target")->capture_default_str();
    attack->add_option("--similarity", ao.similarity, "candidate ranking: none, sentence or contextual")
        ->capture_default_str();
    attack->add_option("--sim-threshold", ao.sim_threshold, "sentence similarity floor with --checks")
        ->capture_default_str();
    attack->add_option("--dropout", ao.dropout, "dropout probability for external_dropout");
    attack->add_flag("--checks", ao.checks, "POS and sentence-similarity filtering");
    attack->add_flag("--sanitize", ao.sanitize, "drop trivial candidates");
    attack->add_flag("--original-context", ao.original_context, "send the unperturbed document to the encoder");
    attack->add_option("--out", ao.out, "attacked jsonl to write")->required();

    AugmentOpts uo;
    auto* aug = app.add_subcommand("augment", "generate perturbed training samples");
    aug->add_option("--model", uo.model, "model file")->required();
    aug->add_option("--input", uo.input, "documents to augment")->required();
    aug->add_option("--format", uo.format, "jsonl or tsv")->capture_default_str();
    aug->add_option("--label", uo.label, "label y for omission scores (default: each document's label)");
    aug->add_option("--embeddings", uo.embeddings, "embedding table for the synonym generator");
    aug->add_option("--lexicon", uo.lexicon, "synonym lexicon");
    aug->add_option("--pos-lexicon", uo.pos_lexicon, "part-of-speech lexicon");
    aug->add_option("--encoder-endpoint", uo.encoder, "external encoder URL");
    aug->add_option("--generator", uo.generators, "candidate generator (repeatable)");
    aug->add_option("--delta", uo.delta, "synonym cosine threshold")->capture_default_str();
    aug->add_option("--n", uo.n, "synonym candidates per word")->capture_default_str();
    aug->add_option("--k", uo.k, "maximum number of target words")->capture_default_str();
    aug->add_option("--top-k", uo.top_k, "external/lexicon candidates per word")->capture_default_str();
    aug->add_option("--min-score", uo.min_score, "minimum omission score of a target")->capture_default_str();
    aug->add_option("--max-samples", uo.max_samples, "samples per document")->capture_default_str();
    aug->add_option("--mark-token", uo.mark_token, "token prepended to samples (empty: none)")->capture_default_str();
    aug->add_option("--dropout", uo.dropout, "dropout probability for external_dropout")->capture_default_str();
    aug->add_flag("--no-sanitize", uo.no_sanitize, "keep trivial candidates");
    aug->add_option("--out", uo.out, "augmented jsonl to write")->required();

    EvalOpts eo;
    auto* eval = app.add_subcommand("eval", "run an experiment plan and write reports");
    eval->add_option("--plan", eo.plan, "TOML experiment plan")->required();

    ServeOpts so;
    auto* serve = app.add_subcommand("serve", "serve interactive sessions over HTTP");
    serve->add_option("--model", so.model, "substitute model file");
    serve->add_option("--embeddings", so.embeddings, "embedding table for the synonym generator");
    serve->add_option("--lexicon", so.lexicon, "synonym lexicon");
    serve->add_option("--pos-lexicon", so.pos_lexicon, "part-of-speech lexicon");
    serve->add_option("--encoder-endpoint", so.encoder, "external encoder URL");
    serve->add_option("--host", so.host, "bind address")->capture_default_str();
    serve->add_option("--port", so.port, "port (0 picks a free one)")->capture_default_str();
    serve->add_option("--static-dir", so.static_dir, "directory served under /");
    serve->add_option("--ttl", so.ttl, "session idle timeout in seconds")->capture_default_str();

    FixtureOpts fo;
    auto* fixture = app.add_subcommand("fixture", "write the synthetic two-class corpus and its embeddings");
    fixture->add_option("--n-docs", fo.n_docs, "number of documents")->capture_default_str();
    fixture->add_option("--markers", fo.markers, "marker words per class")->capture_default_str();
    fixture->add_option("--variants", fo.variants, "embedding-only variants per marker")->capture_default_str();
    fixture->add_option("--max-markers", fo.max_markers, "most own-class markers in one document")->capture_default_str();
    fixture->add_option("--noise", fo.noise, "chance of one other-class marker per document")->capture_default_str();
    fixture->add_option("--out", fo.out, "output stem (<out>.jsonl, <out>.vec)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* shown = &app;
        for (const auto* sub : app.get_subcommands()) shown = sub;
        out << shown->help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*train) return cmd_train(g, to, out);
        if (*attack) return cmd_attack(g, ao, out, err);
        if (*aug) return cmd_augment(g, uo, out);
        if (*eval) return cmd_eval(g, eo, out, err);
        if (*serve) return cmd_serve(g, so, out, err);
        if (*fixture) return cmd_fixture(g, fo, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace veil
