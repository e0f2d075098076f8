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

#include "veil/encoder.hpp"

#include <httplib.h>

#include <cmath>

namespace veil {

using json = nlohmann::json;

std::string to_string(EncoderMode mode) {
    switch (mode) {
    case EncoderMode::masked: return "masked";
    case EncoderMode::dropout: return "dropout";
    case EncoderMode::encode: return "encode";
    }
    return "?";
}

json to_json(const EncoderRequest& r) {
    return {{"mode", to_string(r.mode)},
            {"tokens", r.tokens},
            {"target_index", r.target_index},
            {"top_k", r.top_k},
            {"dropout_p", r.dropout_p}};
}

EncoderRequest request_from_json(const json& j) {
    EncoderRequest r;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "masked") r.mode = EncoderMode::masked;
    else if (mode == "dropout") r.mode = EncoderMode::dropout;
    else if (mode == "encode") r.mode = EncoderMode::encode;
    else throw ConfigError("unknown encoder mode '" + mode + "'");
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.target_index = j.at("target_index").get<std::size_t>();
    r.top_k = j.at("top_k").get<std::size_t>();
    r.dropout_p = j.at("dropout_p").get<double>();
    return r;
}

std::vector<Candidate> parse_candidate_response(std::string_view body, Generator generator) {
    try {
        const auto j = json::parse(body);
        std::vector<Candidate> out;
        for (const auto& c : j.at("candidates")) {
            Candidate cand{c.at("token").get<std::string>(), c.at("score").get<double>(), generator};
            if (cand.token.empty() || !std::isfinite(cand.score))
                throw EncoderError(EncoderError::Kind::malformed, "encoder returned an empty token or non-finite score");
            out.push_back(std::move(cand));
        }
        return out;
    } catch (const json::exception& e) {
        throw EncoderError(EncoderError::Kind::malformed, std::string("malformed encoder response: ") + e.what());
    }
}

ContextualEncoding parse_encode_response(std::string_view body, std::size_t n_tokens) {
    ContextualEncoding enc;
    try {
        const auto j = json::parse(body);
        enc.vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
        enc.attention = j.at("attention_to_target").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw EncoderError(EncoderError::Kind::malformed, std::string("malformed encoder response: ") + e.what());
    }
    if (enc.vectors.size() != n_tokens || enc.attention.size() != n_tokens)
        throw EncoderError(EncoderError::Kind::malformed,
                           "encoder arrays do not align with the " + std::to_string(n_tokens) + " request tokens");
    try {
        enc.validate();
    } catch (const ConfigError& e) {
        throw EncoderError(EncoderError::Kind::malformed, e.what());
    }
    return enc;
}

EncoderClient::EncoderClient(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
    const auto scheme = endpoint_.find("://");
    if (scheme == std::string::npos || endpoint_.substr(0, scheme) != "http")
        throw ConfigError("encoder endpoint must look like http://host:port[/path]: '" + endpoint_ + "'");
    const auto slash = endpoint_.find('/', scheme + 3);
    base_ = endpoint_.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint_.substr(slash);
}

std::string EncoderClient::post(const json& request) const {
    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_, request.dump(), "application/json");
    if (!res) {
        const auto elapsed = std::chrono::steady_clock::now() - start;
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout ||
            (err == httplib::Error::Read && elapsed >= timeout_ * 9 / 10))
            throw EncoderError(EncoderError::Kind::timeout, "encoder at " + endpoint_ + " timed out");
        throw EncoderError(EncoderError::Kind::connection,
                           "cannot reach encoder at " + endpoint_ + ": " + httplib::to_string(err));
    }
    if (res->status != 200)
        throw EncoderError(EncoderError::Kind::status,
                           "encoder at " + endpoint_ + " answered HTTP " + std::to_string(res->status));
    return res->body;
}

std::vector<Candidate> EncoderClient::candidates(std::span<const std::string> tokens, std::size_t target_index,
                                                 EncoderMode mode, std::size_t top_k, double dropout_p) const {
    if (mode == EncoderMode::encode) throw ConfigError("candidate requests use the masked or dropout mode");
    EncoderRequest req{mode, {tokens.begin(), tokens.end()}, target_index, top_k, dropout_p};
    auto out = parse_candidate_response(post(to_json(req)),
                                        mode == EncoderMode::masked ? Generator::external_masked
                                                                    : Generator::external_dropout);
    if (out.size() > top_k) out.resize(top_k);
    return out;
}

ContextualEncoding EncoderClient::encode(std::span<const std::string> tokens, std::size_t target_index) const {
    EncoderRequest req{EncoderMode::encode, {tokens.begin(), tokens.end()}, target_index, 0, 0.0};
    return parse_encode_response(post(to_json(req)), tokens.size());
}

std::vector<Candidate> external_candidates(std::span<const std::string> tokens, std::size_t target_index,
                                           EncoderMode mode, std::size_t top_k, double dropout_p,
                                           const EncoderClient& client) {
    if (top_k == 0) return {};
    return client.candidates(tokens, target_index, mode, top_k, dropout_p);
}

} // namespace veil
