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

#include "veil/importance.hpp"
#include "veil/server.hpp"
#include "veil/text.hpp"

#include "stub_encoder.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

using namespace veil;
using json = nlohmann::json;
using veil::testing::ugly_embeddings;
using veil::testing::ugly_model;

namespace {

ServerConfig ugly_config() {
    ServerConfig cfg;
    cfg.model = std::make_shared<const ClassifierModel>(ugly_model({{"ugly", 1.0}}));
    cfg.embeddings = std::make_shared<const EmbeddingTable>(ugly_embeddings());
    return cfg;
}

std::string create_ugly(SessionService& svc) {
    const auto r = svc.create(R"({"text": "You are ugly", "label": "B"})");
    EXPECT_EQ(r.status, 201);
    return r.body.at("session_id").get<std::string>();
}

std::vector<std::string> state_tokens(const ApiResponse& r) { return r.body.at("tokens").get<std::vector<std::string>>(); }

} // namespace

TEST(Session, CreateTokenizesAndScores) {
    SessionService svc(ugly_config());
    const auto r = svc.create(R"({"text": "You are ugly", "label": "B"})");
    ASSERT_EQ(r.status, 201);
    EXPECT_EQ(state_tokens(r), tokenize("You are ugly"));
    EXPECT_EQ(r.body.at("prediction"), "B");
    const auto& p = r.body.at("probabilities");
    const auto expected = softmax(std::vector<double>{0.0, 1.0});
    EXPECT_DOUBLE_EQ(p.at("B").get<double>(), expected[1]);
    EXPECT_NEAR(p.at("A").get<double>() + p.at("B").get<double>(), 1.0, 1e-12);
}

TEST(Session, CreateErrors) {
    SessionService svc(ugly_config());
    EXPECT_EQ(svc.create(R"({"text": "hi", "label": "purple"})").status, 400);
    EXPECT_EQ(svc.create(R"({"text": "   ", "label": "B"})").status, 400);
    EXPECT_EQ(svc.create("not json").status, 400);
    SessionService empty(ServerConfig{});
    EXPECT_EQ(empty.create(R"({"text": "hi", "label": "B"})").status, 503);
}

TEST(Session, ImportanceRanksUglyFirst) {
    SessionService svc(ugly_config());
    const auto id = create_ugly(svc);
    const auto r = svc.importance(id);
    ASSERT_EQ(r.status, 200);
    const auto& imp = r.body.at("importance");
    EXPECT_EQ(imp[0].at("token"), "ugly");
    EXPECT_DOUBLE_EQ(imp[0].at("score").get<double>(), 1.0);
    // Same values as the library call.
    const auto lib = omission_scores(*ugly_config().model, tokenize("You are ugly"), "B");
    for (const auto& e : imp) EXPECT_EQ(e.at("score").get<double>(), lib[e.at("index").get<std::size_t>()].score);
    EXPECT_EQ(svc.importance("nope").status, 404);
}

TEST(Session, ImportanceFollowsCurrentDocument) {
    SessionService svc(ugly_config());
    const auto id = create_ugly(svc);
    ASSERT_EQ(svc.apply(id, R"({"index": 2, "token": "plain"})").status, 200);
    for (const auto& e : svc.importance(id).body.at("importance")) EXPECT_EQ(e.at("score").get<double>(), 0.0);
}

TEST(Session, CandidatesProjectLogits) {
    SessionService svc(ugly_config());
    const auto id = create_ugly(svc);
    const auto r = svc.candidates(id, {{"index", "2"}, {"generator", "synonym"}});
    ASSERT_EQ(r.status, 200);
    const auto& c = r.body.at("candidates");
    ASSERT_EQ(c.size(), 2u);
    bool saw_plain = false;
    for (const auto& x : c) {
        EXPECT_LT(x.at("o_y_after").get<double>(), r.body.at("o_y").get<double>());
        saw_plain |= x.at("token") == "plain";
    }
    EXPECT_TRUE(saw_plain);
    // Reads leave the session untouched.
    EXPECT_EQ(svc.get(id).body.at("history_len"), 0);
}

TEST(Session, CandidateErrors) {
    SessionService svc(ugly_config());
    const auto id = create_ugly(svc);
    EXPECT_EQ(svc.candidates(id, {{"index", "2"}, {"top_k", "0"}}).body.at("candidates").size(), 0u);
    EXPECT_EQ(svc.candidates(id, {{"index", "9"}}).status, 400);
    EXPECT_EQ(svc.candidates(id, {{"index", "x"}}).status, 400);
    EXPECT_EQ(svc.candidates(id, {{"index", "1"}, {"generator", "bogus"}}).status, 400);
    const auto ext = svc.candidates(id, {{"index", "1"}, {"generator", "external_masked"}});
    EXPECT_EQ(ext.status, 400);
    EXPECT_NE(ext.body.at("error").get<std::string>().find("encoder"), std::string::npos);
    EXPECT_EQ(svc.candidates("nope", {{"index", "1"}}).status, 404);
}

TEST(Session, ExternalGenerator) {
    veil::testing::StubEncoder stub(veil::testing::fixed_list({"plain", "homely"}));
    auto cfg = ugly_config();
    cfg.encoder = std::make_shared<const EncoderClient>(stub.endpoint());
    SessionService svc(cfg);
    const auto id = create_ugly(svc);
    const auto r = svc.candidates(id, {{"index", "2"}, {"generator", "external_masked"}});
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body.at("candidates")[0].at("token"), "plain");
}

TEST(Session, ApplyFlipsAndRevertRestores) {
    SessionService svc(ugly_config());
    const auto id = create_ugly(svc);
    const auto before = svc.get(id).body.dump();
    const auto a = svc.apply(id, R"({"index": 2, "token": "plain", "generator": "synonym"})");
    ASSERT_EQ(a.status, 200);
    EXPECT_EQ(a.body.at("prediction"), "A");
    EXPECT_EQ(a.body.at("history_len"), 1);
    const auto r = svc.revert(id);
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(svc.get(id).body.dump(), before);
    EXPECT_EQ(svc.revert(id).status, 409);
    EXPECT_EQ(svc.apply(id, R"({"index": 7, "token": "x"})").status, 400);
    EXPECT_EQ(svc.apply("nope", R"({"index": 0, "token": "x"})").status, 404);
}

TEST(Session, HistoryReplayMatchesCurrent) {
    SessionService svc(ugly_config());
    const auto id = create_ugly(svc);
    Rng rng(13);
    const std::vector<std::string> words{"plain", "mean", "nice", "you", "odd"};
    for (int op = 0; op < 60; ++op) {
        if (rng.bernoulli(0.35)) {
            svc.revert(id);
        } else {
            json body{{"index", rng.uniform_index(3)}, {"token", words[rng.uniform_index(words.size())]}};
            ASSERT_EQ(svc.apply(id, body.dump()).status, 200);
        }
        const auto s = svc.get(id).body;
        auto replay = s.at("original_tokens").get<std::vector<std::string>>();
        for (const auto& h : s.at("history")) replay[h.at("index").get<std::size_t>()] = h.at("new").get<std::string>();
        EXPECT_EQ(replay, s.at("tokens").get<std::vector<std::string>>());
        EXPECT_EQ(s.at("history_len").get<std::size_t>(), s.at("history").size());
    }
}

TEST(Session, IdempotentReadsAndModelUntouched) {
    auto cfg = ugly_config();
    const auto weights = cfg.model->weights();
    SessionService svc(cfg);
    const auto id = create_ugly(svc);
    svc.apply(id, R"({"index": 2, "token": "plain"})");
    EXPECT_EQ(svc.get(id).body.dump(), svc.get(id).body.dump());
    EXPECT_EQ(svc.importance(id).body.dump(), svc.importance(id).body.dump());
    EXPECT_EQ(svc.candidates(id, {{"index", "0"}, {"generator", "leet"}}).body.dump(),
              svc.candidates(id, {{"index", "0"}, {"generator", "leet"}}).body.dump());
    EXPECT_EQ(cfg.model->weights(), weights);
}

TEST(Session, IdsUniqueAndTtl) {
    auto cfg = ugly_config();
    cfg.ttl = std::chrono::seconds(0);
    SessionService svc(cfg);
    std::set<std::string> ids;
    for (int i = 0; i < 20; ++i) ids.insert(create_ugly(svc));
    EXPECT_EQ(ids.size(), 20u);
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    svc.purge_expired();
    EXPECT_EQ(svc.session_count(), 0u);
}

TEST(Session, Meta) {
    SessionService svc(ugly_config());
    const auto m = svc.meta();
    EXPECT_EQ(m.status, 200);
    EXPECT_EQ(m.body.at("labels"), json({"A", "B"}));
    EXPECT_EQ(m.body.at("generators").size(), 7u);
}

TEST(Http, EndToEnd) {
    veil::testing::TempDir static_dir("static");
    veil::testing::write_file(static_dir / "index.html", "<html>veil</html>");
    auto cfg = ugly_config();
    cfg.static_dir = static_dir.path();
    SessionService svc(cfg);
    ASSERT_TRUE(svc.bind("127.0.0.1", 0));
    std::thread t([&] { svc.serve(); });
    httplib::Client cli("127.0.0.1", svc.port());

    auto meta = cli.Get("/v1/meta");
    ASSERT_TRUE(meta);
    EXPECT_EQ(meta->status, 200);
    EXPECT_EQ(json::parse(meta->body).at("labels"), json({"A", "B"}));

    auto created = cli.Post("/v1/sessions", R"({"text": "you are ugly", "label": "B"})", "application/json");
    ASSERT_TRUE(created);
    ASSERT_EQ(created->status, 201);
    const auto id = json::parse(created->body).at("session_id").get<std::string>();

    auto imp = cli.Get("/v1/sessions/" + id + "/importance");
    ASSERT_TRUE(imp);
    EXPECT_EQ(json::parse(imp->body).at("importance")[0].at("token"), "ugly");

    auto cand = cli.Get("/v1/sessions/" + id + "/candidates?index=2&generator=synonym&top_k=1");
    ASSERT_TRUE(cand);
    EXPECT_EQ(json::parse(cand->body).at("candidates").size(), 1u);

    auto applied = cli.Post("/v1/sessions/" + id + "/apply", R"({"index": 2, "token": "plain"})", "application/json");
    ASSERT_TRUE(applied);
    EXPECT_EQ(json::parse(applied->body).at("prediction"), "A");
    auto reverted = cli.Post("/v1/sessions/" + id + "/revert", "", "application/json");
    ASSERT_TRUE(reverted);
    EXPECT_EQ(json::parse(reverted->body).at("prediction"), "B");
    auto empty_revert = cli.Post("/v1/sessions/" + id + "/revert", "", "application/json");
    EXPECT_EQ(empty_revert->status, 409);

    EXPECT_EQ(cli.Get("/v1/sessions/zzz")->status, 404);
    auto page = cli.Get("/index.html");
    ASSERT_TRUE(page);
    EXPECT_EQ(page->body, "<html>veil</html>");

    svc.stop();
    t.join();
}

TEST(Softmax, Stable) {
    const auto p = softmax(std::vector<double>{1000.0, 1000.0});
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
}
