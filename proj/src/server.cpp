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

#include "veil/server.hpp"

#include "veil/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace veil {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += p[i] = std::exp(logits[i] - mx);
    for (auto& v : p) v /= z;
    return p;
}

struct SessionService::Session {
    std::string id;
    Document original;
    Tokens current;
    std::string y;
    std::vector<SubstitutionStep> history;
    std::vector<std::string> history_source;  // generator name or "manual"
    std::mutex mu;
    Clock::time_point last_access;
};

namespace {

ApiResponse error(int status, std::string message) { return {status, json{{"error", std::move(message)}}}; }

std::optional<json> parse_body(const std::string& body) {
    try {
        auto j = json::parse(body);
        if (!j.is_object()) return std::nullopt;
        return j;
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

std::optional<std::size_t> parse_size(const std::string& s) {
    if (s.empty() || s.size() > 9 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    return static_cast<std::size_t>(std::stoul(s));
}

} // namespace

SessionService::SessionService(ServerConfig config) : config_(std::move(config)) {
    std::random_device rd;
    id_salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

SessionService::~SessionService() { stop(); }

std::string SessionService::new_id() {
    // Counter keeps ids unique; the salt keeps them unguessable across runs.
    std::mt19937_64 mix(id_salt_ ^ (next_id_ * 0x9E3779B97F4A7C15ull));
    char buf[40];
    std::snprintf(buf, sizeof buf, "s%06llx%016llx", static_cast<unsigned long long>(next_id_),
                  static_cast<unsigned long long>(mix()));
    ++next_id_;
    return buf;
}

void SessionService::purge_expired() {
    const auto now = Clock::now();
    std::lock_guard lock(mu_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        bool expired;
        {
            std::lock_guard slock(it->second->mu);
            expired = now - it->second->last_access > config_.ttl;
        }
        it = expired ? sessions_.erase(it) : std::next(it);
    }
}

std::size_t SessionService::session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) {
    purge_expired();
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

json SessionService::state(const Session& s) const {
    const auto& model = *config_.model;
    const auto logits = model.logits(s.current);
    const auto probs = softmax(logits);
    json p = json::object(), l = json::object();
    for (std::size_t i = 0; i < model.labels().size(); ++i) {
        p[model.labels()[i]] = probs[i];
        l[model.labels()[i]] = logits[i];
    }
    json history = json::array();
    for (std::size_t i = 0; i < s.history.size(); ++i) {
        auto h = to_json(s.history[i]);
        h["generator"] = s.history_source[i];
        history.push_back(std::move(h));
    }
    return {{"session_id", s.id},
            {"label", s.y},
            {"tokens", s.current},
            {"original_tokens", s.original.tokens},
            {"prediction", model.labels()[argmax(logits)]},
            {"probabilities", p},
            {"logits", l},
            {"history", history},
            {"history_len", s.history.size()}};
}

ApiResponse SessionService::create(const std::string& body) {
    if (!config_.model) return error(503, "no model loaded");
    const auto j = parse_body(body);
    if (!j) return error(400, "body must be a json object");
    if (!j->contains("text") || !(*j)["text"].is_string()) return error(400, "'text' (string) is required");
    if (!j->contains("label") || !(*j)["label"].is_string()) return error(400, "'label' (string) is required");
    const auto text = (*j)["text"].get<std::string>();
    const auto label = (*j)["label"].get<std::string>();
    if (!config_.model->label_index(label)) return error(400, "unknown label '" + label + "'");

    auto s = std::make_shared<Session>();
    s->original = Document::from_text("", text, label);
    if (s->original.tokens.empty()) return error(400, "text has no tokens");
    s->current = s->original.tokens;
    s->y = label;
    s->last_access = Clock::now();
    purge_expired();
    {
        std::lock_guard lock(mu_);
        s->id = new_id();
        s->original.id = s->id;
        sessions_.emplace(s->id, s);
    }
    std::lock_guard slock(s->mu);
    return {201, state(*s)};
}

ApiResponse SessionService::get(const std::string& id) {
    const auto s = find(id);
    if (!s) return error(404, "unknown session '" + id + "'");
    std::lock_guard lock(s->mu);
    s->last_access = Clock::now();
    return {200, state(*s)};
}

ApiResponse SessionService::importance(const std::string& id) {
    const auto s = find(id);
    if (!s) return error(404, "unknown session '" + id + "'");
    std::lock_guard lock(s->mu);
    s->last_access = Clock::now();
    auto scores = omission_scores(*config_.model, s->current, s->y);
    std::stable_sort(scores.begin(), scores.end(),
                     [](const ImportanceScore& a, const ImportanceScore& b) { return a.score > b.score; });
    json out = json::array();
    for (const auto& sc : scores)
        out.push_back({{"index", sc.token_index}, {"token", s->current[sc.token_index]}, {"score", sc.score}});
    return {200, json{{"session_id", s->id}, {"importance", out}}};
}

ApiResponse SessionService::candidates(const std::string& id, const std::map<std::string, std::string>& query) {
    const auto s = find(id);
    if (!s) return error(404, "unknown session '" + id + "'");

    auto q = [&](const std::string& k) -> std::optional<std::string> {
        const auto it = query.find(k);
        if (it == query.end()) return std::nullopt;
        return it->second;
    };
    const auto index_s = q("index");
    if (!index_s) return error(400, "'index' is required");
    const auto index = parse_size(*index_s);
    if (!index) return error(400, "'index' must be a non-negative integer");
    Generator g;
    try {
        g = parse_generator(q("generator").value_or("synonym"));
    } catch (const ConfigError& e) {
        return error(400, e.what());
    }
    std::size_t top_k = kDefaultExternalTopK;
    if (const auto t = q("top_k")) {
        const auto v = parse_size(*t);
        if (!v) return error(400, "'top_k' must be a non-negative integer");
        top_k = *v;
    }
    if (g == Generator::synonym && !config_.embeddings) return error(400, "synonym generator: no embeddings loaded");
    if (g == Generator::lexicon && !config_.lexicon) return error(400, "lexicon generator: no lexicon loaded");
    if (is_external(g) && !config_.encoder) return error(400, to_string(g) + ": no encoder endpoint configured");

    std::lock_guard lock(s->mu);
    s->last_access = Clock::now();
    if (*index >= s->current.size())
        return error(400, "index " + std::to_string(*index) + " out of range for " +
                              std::to_string(s->current.size()) + " tokens");

    const auto& model = *config_.model;
    const auto yi = *model.label_index(s->y);
    const auto now = model.logits(s->current);
    json out = json::array();
    if (top_k > 0) {
        AttackConfig cfg;
        cfg.generators = {g};
        cfg.synonyms = config_.synonyms;
        cfg.top_k_per_word = top_k;
        cfg.seed = config_.seed;
        AttackResources res{config_.embeddings.get(), config_.lexicon.get(), config_.pos.get(), config_.encoder.get()};
        std::vector<std::string> warnings;
        auto cands = sanitize(gather_candidates(s->current, *index, cfg, res, &warnings), s->current[*index]);
        if (cands.empty() && !warnings.empty()) return error(502, warnings.front());
        if (cands.size() > top_k) cands.resize(top_k);
        for (const auto& c : cands) {
            auto doc = s->current;
            doc[*index] = c.token;
            const auto logits = model.logits(doc);
            const auto probs = softmax(logits);
            out.push_back({{"token", c.token},
                           {"score", c.score},
                           {"generator", to_string(c.generator)},
                           {"o_y_after", logits[yi]},
                           {"probability_after", probs[yi]},
                           {"prediction_after", model.labels()[argmax(logits)]}});
        }
    }
    return {200, json{{"session_id", s->id},
                      {"index", *index},
                      {"token", s->current[*index]},
                      {"o_y", now[yi]},
                      {"candidates", out}}};
}

ApiResponse SessionService::apply(const std::string& id, const std::string& body) {
    const auto s = find(id);
    if (!s) return error(404, "unknown session '" + id + "'");
    const auto j = parse_body(body);
    if (!j) return error(400, "body must be a json object");
    if (!j->contains("index") || !(*j)["index"].is_number_unsigned())
        return error(400, "'index' (non-negative integer) is required");
    if (!j->contains("token") || !(*j)["token"].is_string()) return error(400, "'token' (string) is required");
    const auto index = (*j)["index"].get<std::size_t>();
    const auto token = (*j)["token"].get<std::string>();
    if (token.empty()) return error(400, "'token' must not be empty");
    std::string source = "manual";
    std::optional<Generator> gen;
    if (j->contains("generator")) {
        if (!(*j)["generator"].is_string()) return error(400, "'generator' must be a string");
        try {
            gen = parse_generator((*j)["generator"].get<std::string>());
            source = to_string(*gen);
        } catch (const ConfigError& e) {
            return error(400, e.what());
        }
    }

    std::lock_guard lock(s->mu);
    s->last_access = Clock::now();
    if (index >= s->current.size())
        return error(400, "index " + std::to_string(index) + " out of range for " +
                              std::to_string(s->current.size()) + " tokens");
    const auto& model = *config_.model;
    const auto yi = *model.label_index(s->y);
    const double before = model.logits(s->current)[yi];
    SubstitutionStep step;
    step.token_index = index;
    step.old_token = s->current[index];
    step.new_token = token;
    step.generator = gen.value_or(Generator::synonym);
    step.o_y_before = before;
    s->current[index] = token;
    step.o_y_after = model.logits(s->current)[yi];
    // A user's choice is accepted by definition, whatever it does to o_y.
    step.accepted = true;
    s->history.push_back(std::move(step));
    s->history_source.push_back(source);
    return {200, state(*s)};
}

ApiResponse SessionService::revert(const std::string& id) {
    const auto s = find(id);
    if (!s) return error(404, "unknown session '" + id + "'");
    std::lock_guard lock(s->mu);
    s->last_access = Clock::now();
    if (s->history.empty()) return error(409, "history is empty");
    const auto& last = s->history.back();
    s->current[last.token_index] = last.old_token;
    s->history.pop_back();
    s->history_source.pop_back();
    return {200, state(*s)};
}

ApiResponse SessionService::meta() const {
    json generators = json::array();
    for (const auto g : {Generator::synonym, Generator::leet, Generator::flip, Generator::space, Generator::lexicon,
                         Generator::external_masked, Generator::external_dropout}) {
        bool available = true;
        if (g == Generator::synonym) available = config_.embeddings != nullptr;
        if (g == Generator::lexicon) available = config_.lexicon != nullptr;
        if (is_external(g)) available = config_.encoder != nullptr;
        generators.push_back({{"name", to_string(g)}, {"available", available}});
    }
    json model = nullptr;
    json labels = json::array();
    if (config_.model) {
        labels = config_.model->labels();
        model = {{"kind", to_string(config_.model->kind())},
                 {"role", to_string(config_.model->role())},
                 {"n_features", config_.model->n_features()},
                 {"format_version", kModelFormatVersion}};
    }
    return {200, json{{"labels", labels},
                      {"generators", generators},
                      {"model", model},
                      {"pos_lexicon", config_.pos != nullptr},
                      {"session_ttl_seconds", config_.ttl.count()}}};
}

void SessionService::install_routes() {
    auto send = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    auto guarded = [send](auto fn) {
        return [send, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                send(res, fn(req));
            } catch (const std::exception& e) {
                send(res, error(500, e.what()));
            }
        };
    };
    auto& h = *http_;
    h.Post("/v1/sessions", guarded([this](const httplib::Request& req) { return create(req.body); }));
    h.Get(R"(/v1/sessions/([A-Za-z0-9]+))",
          guarded([this](const httplib::Request& req) { return get(req.matches[1]); }));
    h.Get(R"(/v1/sessions/([A-Za-z0-9]+)/importance)",
          guarded([this](const httplib::Request& req) { return importance(req.matches[1]); }));
    h.Get(R"(/v1/sessions/([A-Za-z0-9]+)/candidates)", guarded([this](const httplib::Request& req) {
              std::map<std::string, std::string> q;
              for (const auto& [k, v] : req.params) q.emplace(k, v);
              return candidates(req.matches[1], q);
          }));
    h.Post(R"(/v1/sessions/([A-Za-z0-9]+)/apply)",
           guarded([this](const httplib::Request& req) { return apply(req.matches[1], req.body); }));
    h.Post(R"(/v1/sessions/([A-Za-z0-9]+)/revert)",
           guarded([this](const httplib::Request& req) { return revert(req.matches[1]); }));
    h.Get("/v1/meta", guarded([this](const httplib::Request&) { return meta(); }));
    if (config_.static_dir) h.set_mount_point("/", config_.static_dir->string());
}

bool SessionService::bind(const std::string& host, int port) {
    http_ = std::make_unique<httplib::Server>();
    install_routes();
    if (port == 0) {
        port_ = http_->bind_to_any_port(host);
        return port_ > 0;
    }
    port_ = port;
    return http_->bind_to_port(host, port);
}

void SessionService::serve() {
    if (!http_) throw Error("server is not bound");
    http_->listen_after_bind();
}

void SessionService::listen(const std::string& host, int port) {
    if (!bind(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    serve();
}

void SessionService::stop() {
    if (http_) http_->stop();
}

bool SessionService::running() const { return http_ && http_->is_running(); }

} // namespace veil
