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
#include "veil/error.hpp"
#include "veil/text.hpp"

#include "stub_encoder.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace veil;
using veil::testing::StubEncoder;

TEST(Encoder, FixedListSurfacedUnchanged) {
    StubEncoder stub([](const nlohmann::json&) {
        return nlohmann::json{{"candidates", {{{"token", "b"}, {"score", 0.2}}, {{"token", "a"}, {"score", 0.9}}}}};
    });
    EncoderClient client(stub.endpoint());
    const auto c = client.candidates(veil::testing::toks({"x", "y"}), 1, EncoderMode::masked, 10, 0.3);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0], (Candidate{"b", 0.2, Generator::external_masked}));
    EXPECT_EQ(c[1], (Candidate{"a", 0.9, Generator::external_masked}));
}

TEST(Encoder, RequestFollowsWireProtocol) {
    StubEncoder stub(veil::testing::fixed_list({"w"}));
    EncoderClient client(stub.endpoint());
    client.candidates(veil::testing::toks({"x", "y"}), 1, EncoderMode::dropout, 7, 0.2);
    const auto reqs = stub.requests();
    ASSERT_EQ(reqs.size(), 1u);
    const auto r = request_from_json(reqs[0]);
    EXPECT_EQ(r.mode, EncoderMode::dropout);
    EXPECT_EQ(r.tokens, veil::testing::toks({"x", "y"}));
    EXPECT_EQ(r.target_index, 1u);
    EXPECT_EQ(r.top_k, 7u);
    EXPECT_DOUBLE_EQ(r.dropout_p, 0.2);
}

TEST(Encoder, PromptEchoReturnsFiveCandidates) {
    StubEncoder stub(veil::testing::fixed_list({"silly", "useless", "sick", "crazy", "dumb", "extra"}));
    EncoderClient client(stub.endpoint());
    const auto tokens = tokenize("You are a retarded dweeb and stupid af .");
    ASSERT_EQ(tokens[3], "retarded");
    const auto c = external_candidates(tokens, 3, EncoderMode::masked, 5, kAttackDropout, client);
    ASSERT_EQ(c.size(), 5u);
    const std::vector<std::string> expected{"silly", "useless", "sick", "crazy", "dumb"};
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(c[i].token, expected[i]);
    EXPECT_EQ(stub.requests().at(0).at("target_index"), 3);
}

TEST(Encoder, TimeoutIsTyped) {
    StubEncoder stub(veil::testing::fixed_list({"w"}), std::chrono::milliseconds(800));
    EncoderClient client(stub.endpoint(), std::chrono::milliseconds(150));
    try {
        client.candidates(veil::testing::toks({"x"}), 0, EncoderMode::masked, 10, 0.3);
        FAIL() << "expected a timeout";
    } catch (const EncoderError& e) {
        EXPECT_EQ(e.kind(), EncoderError::Kind::timeout);
    }
}

TEST(Encoder, ConnectionFailureIsTyped) {
    int port = 0;
    {
        StubEncoder probe(veil::testing::fixed_list({}));
        port = std::stoi(probe.endpoint().substr(17));
    }
    EncoderClient client("http://127.0.0.1:" + std::to_string(port) + "/predict", std::chrono::milliseconds(500));
    try {
        client.candidates(veil::testing::toks({"x"}), 0, EncoderMode::masked, 10, 0.3);
        FAIL() << "expected a connection error";
    } catch (const EncoderError& e) {
        EXPECT_EQ(e.kind(), EncoderError::Kind::connection);
    }
}

TEST(Encoder, MalformedResponseIsTyped) {
    StubEncoder stub(veil::testing::fixed_list({}));
    stub.reply_raw("{\"candidates\": [{\"token\": 3}]}");
    EncoderClient client(stub.endpoint());
    try {
        client.candidates(veil::testing::toks({"x"}), 0, EncoderMode::masked, 10, 0.3);
        FAIL() << "expected a malformed-response error";
    } catch (const EncoderError& e) {
        EXPECT_EQ(e.kind(), EncoderError::Kind::malformed);
    }
}

TEST(Encoder, EncodeAlignsWithTokens) {
    StubEncoder stub(veil::testing::fixed_list({}));
    EncoderClient client(stub.endpoint());
    const auto enc = client.encode(veil::testing::toks({"a", "b", "c"}), 1);
    EXPECT_EQ(enc.vectors.size(), 3u);
    EXPECT_NEAR(contextual_sim(enc, enc), 1.0, 1e-9);
    EXPECT_THROW(parse_encode_response("{\"vectors\":[[1]],\"attention_to_target\":[1]}", 2), EncoderError);
}

TEST(Encoder, BadEndpointRejected) {
    EXPECT_THROW(EncoderClient("ftp://x"), ConfigError);
    EXPECT_THROW(EncoderClient("localhost:80"), ConfigError);
}
