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

// Client for an out-of-process contextual encoder (masked / dropout word
// prediction and per-token contextual vectors) speaking JSON over HTTP.
//
//   request:  {"mode": "masked"|"dropout"|"encode", "tokens": [...],
//              "target_index": int, "top_k": int, "dropout_p": float}
//   candidates response: {"candidates": [{"token": str, "score": float}, ...]}
//   encode response:     {"vectors": [[float, ...], ...],
//                         "attention_to_target": [float, ...]}
//
// The server collapses out-of-vocabulary word pieces so that every array in
// an encode response lines up 1:1 with the request tokens.

#ifndef VEIL_ENCODER_HPP
#define VEIL_ENCODER_HPP

#include "veil/candidates.hpp"
#include "veil/error.hpp"

#include <json.hpp>

#include <chrono>
#include <span>
#include <string>
#include <vector>

namespace veil {

enum class EncoderMode { masked, dropout, encode };

std::string to_string(EncoderMode mode);

inline constexpr std::size_t kDefaultExternalTopK = 10;
inline constexpr double kAttackDropout = 0.3;
inline constexpr double kAugmentDropout = 0.2;

class EncoderError : public Error {
public:
    enum class Kind { connection, timeout, malformed, status };

    EncoderError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct EncoderRequest {
    EncoderMode mode = EncoderMode::masked;
    std::vector<std::string> tokens;
    std::size_t target_index = 0;
    std::size_t top_k = kDefaultExternalTopK;
    double dropout_p = kAttackDropout;
};

nlohmann::json to_json(const EncoderRequest& request);
EncoderRequest request_from_json(const nlohmann::json& j);

std::vector<Candidate> parse_candidate_response(std::string_view body, Generator generator);
ContextualEncoding parse_encode_response(std::string_view body, std::size_t n_tokens);

class EncoderClient {
public:
    /// `endpoint` is "http://host:port[/path]"; requests are POSTed to path.
    explicit EncoderClient(std::string endpoint,
                           std::chrono::milliseconds timeout = std::chrono::milliseconds(10000));

    const std::string& endpoint() const noexcept { return endpoint_; }

    std::vector<Candidate> candidates(std::span<const std::string> tokens, std::size_t target_index,
                                      EncoderMode mode, std::size_t top_k, double dropout_p) const;
    ContextualEncoding encode(std::span<const std::string> tokens, std::size_t target_index) const;

    std::string post(const nlohmann::json& request) const;

private:
    std::string endpoint_;
    std::string base_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

std::vector<Candidate> external_candidates(std::span<const std::string> tokens, std::size_t target_index,
                                           EncoderMode mode, std::size_t top_k, double dropout_p,
                                           const EncoderClient& client);

} // namespace veil

#endif // VEIL_ENCODER_HPP
