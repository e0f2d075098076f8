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

// Interactive obfuscation sessions over HTTP.
//
//   POST /v1/sessions                      {"text", "label"}      -> 201 state
//   GET  /v1/sessions/{id}                                         -> state
//   GET  /v1/sessions/{id}/importance                              -> ranked scores
//   GET  /v1/sessions/{id}/candidates?index=&generator=&top_k=     -> candidates
//   POST /v1/sessions/{id}/apply           {"index", "token"[, "generator"]}
//   POST /v1/sessions/{id}/revert
//   GET  /v1/meta
//
// Errors are {"error": message} with 400 (bad input), 404 (unknown session),
// 409 (revert on empty history) or 503 (no model loaded).

#ifndef VEIL_SERVER_HPP
#define VEIL_SERVER_HPP

#include "veil/attack.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace veil {

struct ServerConfig {
    std::shared_ptr<const ClassifierModel> model;
    std::shared_ptr<const EmbeddingTable> embeddings;
    std::shared_ptr<const Lexicon> lexicon;
    std::shared_ptr<const PosLexicon> pos;
    std::shared_ptr<const EncoderClient> encoder;
    SynonymConfig synonyms;
    std::chrono::seconds ttl{3600};
    std::optional<std::filesystem::path> static_dir;
    std::uint64_t seed = 0;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

class SessionService {
public:
    explicit SessionService(ServerConfig config);
    ~SessionService();

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    ApiResponse create(const std::string& body);
    ApiResponse get(const std::string& id);
    ApiResponse importance(const std::string& id);
    ApiResponse candidates(const std::string& id, const std::map<std::string, std::string>& query);
    ApiResponse apply(const std::string& id, const std::string& body);
    ApiResponse revert(const std::string& id);
    ApiResponse meta() const;

    std::size_t session_count() const;

    /// Binds and serves until stop(). Port 0 picks a free port; the bound
    /// port is available from port() once running() is true.
    void listen(const std::string& host, int port);
    bool bind(const std::string& host, int port);  // bind only, then serve()
    void serve();
    void stop();
    bool running() const;
    int port() const noexcept { return port_; }

    /// Drops sessions idle longer than the TTL. Called on every request.
    void purge_expired();

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id);
    nlohmann::json state(const Session& s) const;
    std::string new_id();
    void install_routes();

    ServerConfig config_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 0;
    std::uint64_t id_salt_ = 0;
    std::unique_ptr<httplib::Server> http_;
    int port_ = 0;
};

/// Softmax of logits, numerically stabilized.
std::vector<double> softmax(std::span<const double> logits);

} // namespace veil

#endif // VEIL_SERVER_HPP
