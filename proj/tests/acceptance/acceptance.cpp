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

// Acceptance suite: one PASS/FAIL line per headline criterion. Takes the
// path of the veil binary as its only argument (for the CLI determinism
// check). Exit status is the number of failed criteria.

#include "veil/attack.hpp"
#include "veil/harness.hpp"
#include "veil/importance.hpp"
#include "veil/metrics.hpp"
#include "veil/models.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace veil;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (time_limit_s > 0 && secs >= time_limit_s) {
        o.pass = false;
        o.detail += " (over the " + std::to_string(static_cast<int>(time_limit_s)) + " s budget)";
    }
    char t[32];
    std::snprintf(t, sizeof t, "%.2fs", secs);
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << t << "] " << o.detail << std::endl;
    failures += !o.pass;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// The default fixture split in two halves: substitute side and target side.
struct Halves {
    Fixture fx;
    LabeledCorpus substitute, target;
};

const Halves& halves() {
    static const Halves h = [] {
        Halves out;
        out.fx = make_fixture(FixtureSpec{});
        std::tie(out.substitute, out.target) = split(out.fx.corpus, {0.5, 1, true});
        return out;
    }();
    return h;
}

// ------------------------------------------------------------------ 1
Outcome omission_oracle() {
    const auto& fx = halves().fx;
    const auto [train, test] = split(fx.corpus, {0.8, 2, true});
    auto spec = model_preset("logreg");
    const auto model = train_model(train, spec);
    double worst = 0.0;
    std::size_t tokens = 0;
    for (std::size_t d = 0; d < 200; ++d) {
        const auto& doc = test[d % test.size()];
        // Alternate the protected label so the flip bonus branch is exercised too.
        const std::string y = model.labels()[d % 2];
        const auto yi = *model.label_index(y);
        const auto scores = omission_scores(model, doc.tokens, y);
        const auto full = model.logits(doc.tokens);
        const auto pre = argmax(full);
        for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
            Tokens without;
            for (std::size_t j = 0; j < doc.tokens.size(); ++j)
                if (j != i) without.push_back(doc.tokens[j]);
            const auto o = model.logits(without);
            const auto post = argmax(o);
            double expected = full[yi] - o[yi];
            if (pre == yi && post != yi) expected += o[post] - full[post];
            worst = std::max(worst, std::abs(expected - scores[i].score));
            ++tokens;
        }
    }
    return {worst < 1e-9, fmt("max |diff| = %.3g over %.0f tokens", worst, static_cast<double>(tokens))};
}

// ------------------------------------------------------------------ 2
Outcome synonym_oracle() {
    Rng rng(77);
    const std::size_t dim = 16;
    EmbeddingTable table(dim);
    std::vector<std::vector<double>> centers(40, std::vector<double>(dim));
    for (auto& c : centers)
        for (auto& x : c) x = rng.normal();
    for (std::size_t w = 0; w < 1000; ++w) {
        auto v = centers[rng.uniform_index(centers.size())];
        for (auto& x : v) x += 0.6 * rng.normal();
        table.add("w" + std::to_string(w), v);
    }
    const SynonymConfig cfg{50, 0.7};
    std::size_t nonempty = 0, compared = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto t = rng.uniform_index(table.size());
        std::vector<std::pair<double, std::string>> all;
        for (std::size_t j = 0; j < table.size(); ++j) {
            if (j == t) continue;
            const double c = cosine(table.vector(t), table.vector(j));
            if (c > cfg.delta) all.push_back({-c, table.words()[j]});
        }
        std::sort(all.begin(), all.end());
        if (all.size() > cfg.n) all.resize(cfg.n);
        const auto got = synonym_candidates(table.words()[t], table, cfg);
        if (got.size() != all.size()) return {false, "length mismatch for " + table.words()[t]};
        for (std::size_t k = 0; k < got.size(); ++k)
            if (got[k].token != all[k].second || got[k].score != -all[k].first)
                return {false, "mismatch at rank " + std::to_string(k) + " for " + table.words()[t]};
        nonempty += !got.empty();
        compared += got.size();
    }
    return {nonempty >= 25, fmt("50 targets, %.0f candidates compared, %.0f non-empty lists",
                                static_cast<double>(compared), static_cast<double>(nonempty))};
}

// ------------------------------------------------------------------ 3
Outcome heuristics() {
    const auto leet = heuristic_leet("leetspeak").token;
    const auto flip = heuristic_flip("word").token;
    const auto space = heuristic_space_at("position", 3).token;
    const bool ok = leet == "13375p34k" && flip == "wrod" && space == "pos ition";
    return {ok, "leet=" + leet + " flip=" + flip + " space=\"" + space + "\""};
}

// ------------------------------------------------------------------ 4
Outcome delta_arithmetic() {
    const double d = delta_accuracy(0.885, 0.55);
    return {std::abs(d - 0.335) <= 1e-12, fmt("delta = %.15f", d)};
}

// ------------------------------------------------------------------ 5
Outcome attack_effectiveness() {
    const auto& fx = halves().fx;
    const auto [train, test] = split(fx.corpus, {0.5, 1, true});
    const auto model = train_model(train, model_preset("logreg"));
    const std::size_t n = std::min<std::size_t>(200, test.size());
    std::vector<std::string> gold, before, after;
    double rate = 0.0;
    AttackConfig cfg;
    for (std::size_t i = test.size() - n; i < test.size(); ++i) {
        const auto& doc = test[i];
        gold.push_back(*doc.label);
        before.push_back(model.predict(doc));
        const auto r = obfuscate(model, doc, *doc.label, cfg, {&fx.embeddings});
        after.push_back(model.predict(r.adv.tokens));
        rate += change_rate(doc.tokens, r.adv.tokens);
    }
    rate /= static_cast<double>(n);
    const double acc0 = accuracy(before, gold), acc1 = accuracy(after, gold), p = majority_baseline(gold);
    const bool ok = acc0 >= 0.90 && acc1 <= p + 0.05 && rate <= 0.15;
    return {ok, fmt("accuracy %.3f -> %.3f (chance %.3f), mean change rate %.4f", acc0, acc1, p, rate)};
}

// ------------------------------------------------------------------ 6
Outcome transferability(const fs::path& dir) {
    const auto& h = halves();
    write_corpus_jsonl(h.substitute, dir / "sub.jsonl");
    write_corpus_jsonl(h.target, dir / "tgt.jsonl");
    write_embeddings(h.fx.embeddings, dir / "fx.vec");
    const auto plan = parse_plan("seed = 1\n[sample]\nsize = 200\ntrain_fraction = 0.5\n"
                                 "[target]\ncorpus = \"tgt.jsonl\"\nmodels = [\"ngram\"]\n"
                                 "[substitute.lr]\ncorpus = \"sub.jsonl\"\n"
                                 "[attack.syn]\nembeddings = \"fx.vec\"\n",
                                 dir);
    const auto m = run_transfer(plan);
    const auto* none = m.find("-", "none");
    const auto* syn = m.find("lr", "syn");
    if (!none || !syn) return {false, "missing matrix rows"};
    const double a0 = none->cells[0].accuracy, a1 = syn->cells[0].accuracy;
    const bool ok = a0 - a1 >= 0.20 && syn->target_queries_during_attack == 0;
    return {ok, fmt("ngram target accuracy %.3f -> %.3f (drop %.3f), target queries during attack %.0f", a0, a1,
                    a0 - a1, static_cast<double>(syn->target_queries_during_attack))};
}

// ------------------------------------------------------------------ 7
Outcome augmentation_contract() {
    const auto& fx = halves().fx;
    const auto [train, test] = split(fx.corpus, {0.5, 1, true});
    const auto f = train_model(train, model_preset("logreg"));
    const auto cfg = AttackConfig::augmentation();
    std::size_t docs = 0, samples = 0, violations = 0, orig_tp = 0, pert_tp = 0;
    std::string why;
    for (const auto& doc : test.documents()) {
        if (*doc.label != "B") continue;
        ++docs;
        orig_tp += f.predict(doc) == "B";
        const auto out = augment(f, doc, "B", cfg, {&fx.embeddings});
        if (out.size() > 5) ++violations, why = "more than five samples";
        const auto targets = select_targets(omission_scores(f, doc.tokens, "B"), cfg.k, cfg.min_score);
        const std::set<std::size_t> tset(targets.indices.begin(), targets.indices.end());
        std::map<std::size_t, std::set<std::string>> used;
        for (const auto& s : out) {
            ++samples;
            pert_tp += f.predict(s.tokens) == "B";
            for (std::size_t i = 0; i < doc.tokens.size(); ++i)
                if (s.tokens[i] != doc.tokens[i] && !tset.count(i)) ++violations, why = "change off target";
            for (const auto& sub : s.substitutions) {
                if (to_lower(sub.new_token) == to_lower(sub.old_token)) ++violations, why = "identity substitution";
                if (utf8_length(sub.new_token) <= 1) ++violations, why = "single-character substitution";
                if (!used[sub.token_index].insert(to_lower(sub.new_token)).second)
                    ++violations, why = "duplicate substitution";
            }
        }
    }
    const double tpr0 = static_cast<double>(orig_tp) / docs;
    const double tpr1 = samples ? static_cast<double>(pert_tp) / samples : tpr0;
    const bool ok = violations == 0 && samples > 0 && tpr1 <= tpr0;
    return {ok, fmt("%.0f positives, %.0f samples, TPR %.3f -> %.3f", static_cast<double>(docs),
                    static_cast<double>(samples), tpr0, tpr1) +
                    (violations ? ", " + std::to_string(violations) + " violations (" + why + ")" : "")};
}

// ------------------------------------------------------------------ 8
Outcome robustness(const fs::path& dir) {
    const auto& h = halves();
    write_corpus_jsonl(h.fx.corpus, dir / "fx.jsonl");
    write_embeddings(h.fx.embeddings, dir / "fx.vec");
    const auto plan = parse_plan("mode = \"robustness\"\nseed = 1\n[sample]\nsize = 200\ntrain_fraction = 0.5\n"
                                 "[target]\ncorpus = \"fx.jsonl\"\n"
                                 "[attack.syn]\nembeddings = \"fx.vec\"\n",
                                 dir);
    const auto r = run_robustness(plan);
    const auto& m = r.models.at(0);
    const auto row = std::find(m.rows.begin(), m.rows.end(), "syn") - m.rows.begin();
    const double d = m.delta_tpr.at(row).at(0);
    return {d >= 0.05, fmt("same-augmenter delta TPR %+.3f (f_aug clean accuracy %.3f)", d, m.clean.at(row).accuracy)};
}

// ------------------------------------------------------------------ 9
Outcome gradient_check() {
    Rng rng(99);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        BinaryProblem p;
        p.n_features = 10;
        p.loss = Loss::log;
        p.C = 0.1 + 5.0 * rng.uniform01();
        const std::size_t n = 5 + rng.uniform_index(20);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<SparseVector::Entry> e;
            for (std::uint32_t j = 0; j < 10; ++j)
                if (rng.bernoulli(0.5)) e.push_back({j, rng.normal()});
            p.x.emplace_back(std::move(e));
            p.y.push_back(rng.bernoulli(0.5) ? 1.0 : -1.0);
            p.sample_weight.push_back(1.0);
        }
        std::vector<double> w(10);
        for (auto& v : w) v = rng.normal();
        const double b = rng.normal();
        std::vector<double> gw(10);
        double gb = 0.0;
        objective_gradient(p, w, b, gw, gb);
        const double h = 1e-6;
        std::vector<double> num(11);
        for (std::size_t j = 0; j < 10; ++j) {
            auto wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            num[j] = (objective(p, wp, b) - objective(p, wm, b)) / (2 * h);
        }
        num[10] = (objective(p, w, b + h) - objective(p, w, b - h)) / (2 * h);
        double diff = 0.0, na = 0.0, nn = 0.0;
        for (std::size_t j = 0; j < 11; ++j) {
            const double a = j < 10 ? gw[j] : gb;
            diff += (a - num[j]) * (a - num[j]);
            na += a * a;
            nn += num[j] * num[j];
        }
        worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12}));
    }
    return {worst < 1e-5, fmt("max relative error %.3g over 100 instances", worst)};
}

// ------------------------------------------------------------------ 10
Outcome meteor_cases() {
    using veil::testing::toks;
    const double disjoint = meteor_lite(toks({"a", "b"}), toks({"c", "d"}));
    const double same = meteor_lite(toks({"the", "cat", "sat"}), toks({"the", "cat", "sat"}));
    const double slept = meteor_lite(toks({"the", "cat", "slept"}), toks({"the", "cat", "sat"}));
    const bool ok = disjoint == 0.0 && std::abs(same - 0.98148) <= 1e-5 && std::abs(slept - 0.625) <= 1e-5;
    return {ok, fmt("disjoint %.5f, identical %.5f, cat slept %.5f", disjoint, same, slept)};
}

// ------------------------------------------------------------------ 11
Outcome cli_determinism(const std::string& veil_bin, const fs::path& dir) {
    if (veil_bin.empty()) return {false, "no veil binary given"};
    const std::vector<std::string> files{"fx.jsonl", "fx.vec", "fx.markers.json", "m.json", "m.json.summary.json",
                                         "adv.jsonl", "adv.jsonl.summary.json", "aug.jsonl", "reports/transfer.json",
                                         "reports/transfer.txt", "rob/robustness.json", "rob/robustness.txt"};
    for (const char* run : {"a", "b"}) {
        const auto d = dir / run;
        fs::create_directories(d);
        veil::testing::write_file(d / "plan.toml", "seed = 5\n[sample]\nsize = 60\ntrain_fraction = 0.5\n"
                                                   "[target]\ncorpus = \"fx.jsonl\"\nmodels = [\"logreg\", \"nbsvm\"]\n"
                                                   "[substitute.own]\ncorpus = \"fx.jsonl\"\n"
                                                   "[attack.syn]\nembeddings = \"fx.vec\"\n"
                                                   "[attack.mix]\ngenerators = [\"leet\", \"space\"]\n");
        veil::testing::write_file(d / "rob.toml", "mode = \"robustness\"\nseed = 5\n[sample]\nsize = 60\n"
                                                  "train_fraction = 0.5\n[target]\ncorpus = \"fx.jsonl\"\n"
                                                  "[attack.syn]\nembeddings = \"fx.vec\"\n");
        const std::string b = "\"" + veil_bin + "\" --quiet --seed 5 --output-dir \"" + d.string() + "\" ";
        const std::vector<std::string> cmds{
            b + "fixture --n-docs 200 --out fx",
            b + "train --corpus \"" + (d / "fx.jsonl").string() + "\" --out m.json",
            b + "attack --model \"" + (d / "m.json").string() + "\" --input \"" + (d / "fx.jsonl").string() +
                "\" --embeddings \"" + (d / "fx.vec").string() + "\" --generator synonym --generator space --out adv.jsonl",
            b + "augment --model \"" + (d / "m.json").string() + "\" --input \"" + (d / "fx.jsonl").string() +
                "\" --embeddings \"" + (d / "fx.vec").string() + "\" --out aug.jsonl",
            "\"" + veil_bin + "\" --quiet --seed 5 --output-dir \"" + (d / "reports").string() + "\" eval --plan \"" +
                (d / "plan.toml").string() + "\"",
            "\"" + veil_bin + "\" --quiet --seed 5 --output-dir \"" + (d / "rob").string() + "\" eval --plan \"" +
                (d / "rob.toml").string() + "\""};
        for (const auto& c : cmds)
            if (std::system((c + " 2>/dev/null").c_str()) != 0) return {false, "command failed: " + c};
    }
    for (const auto& f : files) {
        // Summaries echo input paths; the run directory itself is the only
        // permitted difference.
        auto a = veil::testing::read_file(dir / "a" / f);
        const auto b = veil::testing::read_file(dir / "b" / f);
        const auto from = (dir / "a").string(), to = (dir / "b").string();
        for (auto pos = a.find(from); pos != std::string::npos; pos = a.find(from, pos + to.size()))
            a.replace(pos, from.size(), to);
        if (a.empty()) return {false, f + " missing or empty"};
        if (a != b) return {false, f + " differs between runs"};
    }
    return {true, std::to_string(files.size()) + " payload files byte-identical across two runs"};
}

} // namespace

int main(int argc, char** argv) {
    const std::string veil_bin = argc > 1 ? argv[1] : "";
    veil::testing::TempDir work("acceptance");
    std::cout << "veil acceptance suite" << std::endl;
    criterion("omission-oracle", 2.0, omission_oracle);
    criterion("synonym-oracle", 0, synonym_oracle);
    criterion("heuristic-tokens", 0, heuristics);
    criterion("delta-accuracy", 0, delta_arithmetic);
    halves();  // fixture generation is shared and not charged to one criterion
    criterion("attack-effectiveness", 30.0, attack_effectiveness);
    criterion("transferability", 60.0, [&] { return transferability(work.path()); });
    criterion("augmentation-contract", 0, augmentation_contract);
    criterion("robustness-direction", 0, [&] { return robustness(work.path()); });
    criterion("gradient-check", 0, gradient_check);
    criterion("meteor-hand-cases", 0, meteor_cases);
    criterion("cli-determinism", 0, [&] { return cli_determinism(veil_bin, work / "cli"); });
    std::cout << (failures ? "FAILED " : "ALL PASSED ") << "(" << failures << " of 11 criteria failed)" << std::endl;
    return failures;
}
