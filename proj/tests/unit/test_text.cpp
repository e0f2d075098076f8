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

#include "veil/error.hpp"
#include "veil/text.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace veil;
using veil::testing::toks;

namespace {

LabeledCorpus make_counts(std::size_t a, std::size_t b) {
    std::vector<Document> docs;
    for (std::size_t i = 0; i < a + b; ++i)
        docs.push_back(Document::from_text("d" + std::to_string(i), "doc " + std::to_string(i), i < a ? "a" : "b"));
    return LabeledCorpus(std::move(docs));
}

std::size_t count_label(const LabeledCorpus& c, const std::string& label) {
    std::size_t n = 0;
    for (const auto& d : c.documents()) n += d.label == label;
    return n;
}

} // namespace

TEST(Tokenize, MentionBecomesUserToken) {
    EXPECT_EQ(tokenize("Hello @bob!"), toks({"hello", "<user>", "!"}));
}

TEST(Tokenize, HashtagSplitAndUrlDropped) {
    EXPECT_EQ(tokenize("#word http://x.co"), toks({"#", "word"}));
}

TEST(Tokenize, PromptSentenceHasNineTokens) {
    const auto t = tokenize("You are a retarded dweeb and stupid af .");
    ASSERT_EQ(t.size(), 9u);
    EXPECT_EQ(t[7], "af");
    EXPECT_EQ(t[8], ".");
}

TEST(Tokenize, EmptyAndWhitespace) {
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_TRUE(tokenize("  \t\n ").empty());
}

TEST(Tokenize, IdempotentOnJoinedOutput) {
    const char* inputs[] = {"Hello @bob!", "It's   a TEST... right?!", "#tag www.example.com/x ok",
                            "numbers 3.14 and 42%", "emoji \xF0\x9F\x98\x80 here", "a--b,c;d"};
    for (const char* in : inputs) {
        const auto once = tokenize(in);
        const auto doc = Document::from_text("x", in);
        EXPECT_EQ(tokenize(doc.text()), once) << in;
    }
}

TEST(Corpus, JsonlTwoLines) {
    const auto c = parse_corpus("{\"text\":\"one\",\"label\":\"b\"}\n{\"text\":\"two\",\"label\":\"a\"}\n",
                                CorpusFormat::jsonl);
    EXPECT_EQ(c.size(), 2u);
    EXPECT_EQ(c.labels(), (std::vector<std::string>{"a", "b"}));
}

TEST(Corpus, TsvMatchesJsonl) {
    const auto j = parse_corpus("{\"text\":\"Hi there\",\"label\":\"a\"}\n{\"text\":\"bye\",\"label\":\"b\"}\n",
                                CorpusFormat::jsonl);
    const auto t = parse_corpus("text\tlabel\nHi there\ta\nbye\tb\n", CorpusFormat::tsv);
    ASSERT_EQ(j.size(), t.size());
    EXPECT_EQ(j.labels(), t.labels());
    for (std::size_t i = 0; i < j.size(); ++i) {
        EXPECT_EQ(j[i].tokens, t[i].tokens);
        EXPECT_EQ(j[i].label, t[i].label);
    }
}

TEST(Corpus, MissingTextReportsLine) {
    try {
        parse_corpus("{\"text\":\"ok\",\"label\":\"a\"}\n{\"label\":\"a\"}\n", CorpusFormat::jsonl);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Corpus, UnknownFormat) { EXPECT_THROW(parse_corpus_format("xml"), Error); }

TEST(Corpus, WriteLoadRoundTrip) {
    veil::testing::TempDir dir("text");
    const auto c = parse_corpus("{\"id\":\"u:1\",\"text\":\"Hello @bob!\",\"label\":\"a\"}\n"
                                "{\"id\":\"u:2\",\"text\":\"more words\",\"label\":\"b\"}\n",
                                CorpusFormat::jsonl);
    write_corpus_jsonl(c, dir / "c.jsonl");
    const auto back = load_corpus(dir / "c.jsonl", CorpusFormat::jsonl);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].id, "u:1");
    EXPECT_EQ(back[0].tokens, c[0].tokens);
    EXPECT_EQ(back.labels(), c.labels());
}

TEST(Chunk, AuthorWith250DocsGivesThreeChunks) {
    std::vector<Document> docs;
    for (int i = 0; i < 250; ++i) docs.push_back(Document::from_text("ann:" + std::to_string(i), "w", "a"));
    docs.push_back(Document::from_text("bob:0", "x", "b"));
    const auto chunks = chunk_by_author(LabeledCorpus(std::move(docs)), 100);
    ASSERT_EQ(chunks.size(), 4u);
    EXPECT_EQ(chunks[0].tokens.size(), 100u);
    EXPECT_EQ(chunks[1].tokens.size(), 100u);
    EXPECT_EQ(chunks[2].tokens.size(), 50u);
    EXPECT_EQ(chunks[3].label, "b");
}

TEST(Chunk, SingleDoc) {
    const auto chunks = chunk_by_author(LabeledCorpus({Document::from_text("solo", "hi", "a")}), 100);
    EXPECT_EQ(chunks.size(), 1u);
}

TEST(Chunk, MixedLabelsRejected) {
    LabeledCorpus c({Document::from_text("ann:0", "x", "a"), Document::from_text("ann:1", "y", "b")});
    EXPECT_THROW(chunk_by_author(c, 100), Error);
}

TEST(Split, ExactProportion) {
    const auto [train, test] = split(make_counts(5, 5), {0.8, 3, true});
    EXPECT_EQ(train.size(), 8u);
    EXPECT_EQ(count_label(train, "a"), 4u);
    EXPECT_EQ(count_label(test, "a"), 1u);
    EXPECT_EQ(count_label(test, "b"), 1u);
}

TEST(Split, Unbalanced90To10) {
    const auto [train, test] = split(make_counts(90, 10), {0.9, 11, true});
    EXPECT_EQ(count_label(test, "a"), 9u);
    EXPECT_EQ(count_label(test, "b"), 1u);
}

TEST(Split, DeterministicPartition) {
    const auto c = make_counts(37, 23);
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
        const auto a = split(c, {0.7, seed, true});
        const auto b = split(c, {0.7, seed, true});
        std::vector<std::string> ids_a, ids_b;
        for (const auto& d : a.first.documents()) ids_a.push_back(d.id);
        for (const auto& d : b.first.documents()) ids_b.push_back(d.id);
        EXPECT_EQ(ids_a, ids_b);

        std::set<std::string> seen;
        for (const auto& d : a.first.documents()) seen.insert(d.id);
        for (const auto& d : a.second.documents()) EXPECT_TRUE(seen.insert(d.id).second) << d.id;
        EXPECT_EQ(seen.size(), c.size());
    }
}

TEST(Split, StratificationWithinOne) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t a = 2 + rng.uniform_index(40), b = 2 + rng.uniform_index(40);
        const double frac = 0.1 + 0.8 * rng.uniform01();
        const auto [train, test] = split(make_counts(a, b), {frac, rng.next(), true});
        for (auto [label, total] : {std::pair<std::string, std::size_t>{"a", a}, {"b", b}}) {
            const double diff = std::abs(static_cast<double>(count_label(train, label)) - std::round(frac * total));
            EXPECT_LE(diff, 1.0);
            EXPECT_GE(count_label(train, label), 1u);
            EXPECT_GE(count_label(test, label), 1u);
        }
    }
}

TEST(Split, ImpossibleStratification) {
    EXPECT_THROW(split(make_counts(1, 5), {0.5, 0, true}), Error);
}

TEST(Jaccard, Examples) {
    EXPECT_DOUBLE_EQ(jaccard({"a", "b", "c"}, {"a", "b", "c"}), 1.0);
    EXPECT_DOUBLE_EQ(jaccard({"a"}, {"b"}), 0.0);
    EXPECT_DOUBLE_EQ(jaccard({"a", "b", "c"}, {"b", "c", "d"}), 0.5);
    EXPECT_DOUBLE_EQ(jaccard({}, {}), 1.0);
}

TEST(Jaccard, SymmetricAndMonotone) {
    // Fixed union {0..9}; moving elements out of the intersection only
    // grows the symmetric difference.
    std::set<std::string> a, b;
    for (int i = 0; i < 10; ++i) a.insert(std::to_string(i)), b.insert(std::to_string(i));
    double last = jaccard(a, b);
    for (int i = 0; i < 10; ++i) {
        (i % 2 ? a : b).erase(std::to_string(i));
        const double j = jaccard(a, b);
        EXPECT_DOUBLE_EQ(j, jaccard(b, a));
        EXPECT_LE(j, last);
        last = j;
    }
}
