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
#include "veil/features.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace veil;
using veil::testing::toks;

namespace {

LabeledCorpus corpus_of(std::initializer_list<const char*> texts) {
    std::vector<Document> docs;
    int i = 0;
    for (const char* t : texts) docs.push_back(Document::from_text(std::to_string(i), t, i % 2 ? "b" : "a")), ++i;
    return LabeledCorpus(std::move(docs));
}

double value_of(const FeatureSpace& s, const SparseVector& v, const std::string& gram) {
    const auto col = s.column(gram);
    if (!col) return 0.0;
    for (const auto& e : v)
        if (e.index == *col) return e.value;
    return 0.0;
}

} // namespace

TEST(Fit, SingleDocIdfIsOne) {
    const auto s = FeatureSpace::fit(corpus_of({"hello world"}), FeatureConfig{});
    for (double idf : s.idf()) EXPECT_DOUBLE_EQ(idf, 1.0);
}

TEST(Fit, SmoothedIdf) {
    const auto s = FeatureSpace::fit(corpus_of({"x y", "x z", "y", "z"}), FeatureConfig{});
    const auto col = s.column("w:x");
    ASSERT_TRUE(col);
    EXPECT_NEAR(s.idf()[*col], 1.5108, 1e-4);
    EXPECT_DOUBLE_EQ(s.idf()[*col], std::log(5.0 / 3.0) + 1.0);
}

TEST(Fit, MinDfDropsRareGrams) {
    FeatureConfig fc;
    fc.min_df = 3;
    const auto s = FeatureSpace::fit(corpus_of({"x y", "x y", "y", "z y"}), fc);
    EXPECT_FALSE(s.column("w:x"));
    EXPECT_TRUE(s.column("w:y"));
}

TEST(Fit, EmptyVocabularyRejected) {
    FeatureConfig fc;
    fc.min_df = 5;
    EXPECT_THROW(FeatureSpace::fit(corpus_of({"x", "y"}), fc), Error);
}

TEST(Fit, GramsSortedAndDense) {
    FeatureConfig fc;
    fc.word_ngrams = {1, 3};
    fc.char_ngrams = 3;
    const auto s = FeatureSpace::fit(corpus_of({"the quick fox", "a lazy dog", "the dog"}), fc);
    EXPECT_TRUE(std::is_sorted(s.grams().begin(), s.grams().end()));
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.column(s.grams()[i]), i);
}

TEST(Transform, EmptyDocument) {
    const auto s = FeatureSpace::fit(corpus_of({"x y"}), FeatureConfig{});
    EXPECT_TRUE(s.transform(Tokens{}).empty());
}

TEST(Transform, SublinearTfOfOne) {
    FeatureConfig fc;
    fc.sublinear_tf = true;
    const auto s = FeatureSpace::fit(corpus_of({"x y", "y"}), fc);
    const auto v = s.transform(toks({"x"}));
    EXPECT_DOUBLE_EQ(value_of(s, v, "w:x"), s.idf()[*s.column("w:x")]);
}

TEST(Transform, SublinearTfOfThree) {
    FeatureConfig fc;
    fc.sublinear_tf = true;
    const auto s = FeatureSpace::fit(corpus_of({"x y", "x z", "y", "z"}), fc);
    const auto v = s.transform(toks({"x", "x", "x"}));
    EXPECT_NEAR(value_of(s, v, "w:x"), 3.1706, 1e-4);
}

TEST(Transform, UnknownGramsIgnored) {
    const auto s = FeatureSpace::fit(corpus_of({"x y"}), FeatureConfig{});
    EXPECT_TRUE(s.transform(toks({"never", "seen"})).empty());
}

TEST(Transform, BinaryValuesAreOne) {
    FeatureConfig fc;
    fc.weighting = Weighting::binary;
    fc.word_ngrams = {1, 2};
    const auto s = FeatureSpace::fit(corpus_of({"a b a b c", "c d"}), fc);
    const auto v = s.transform(toks({"a", "b", "a", "b", "c", "d"}));
    ASSERT_FALSE(v.empty());
    for (const auto& e : v) EXPECT_EQ(e.value, 1.0);
}

TEST(Transform, DeterministicAndValid) {
    FeatureConfig fc;
    fc.word_ngrams = {1, 2};
    fc.char_ngrams = 4;
    fc.sublinear_tf = true;
    const auto c = corpus_of({"some words here", "other words there", "words words words"});
    const auto s = FeatureSpace::fit(c, fc);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        Tokens t;
        const std::vector<std::string> pool{"some", "words", "here", "other", "there", "unk"};
        for (int j = 0; j < 6; ++j) t.push_back(pool[rng.uniform_index(pool.size())]);
        const auto a = s.transform(t), b = s.transform(t);
        EXPECT_EQ(a, b);
        std::int64_t last = -1;
        for (const auto& e : a) {
            EXPECT_NE(e.value, 0.0);
            EXPECT_LT(e.index, s.size());
            EXPECT_GT(static_cast<std::int64_t>(e.index), last);
            last = e.index;
        }
    }
}

TEST(CharGrams, ShortTokenContributesNothing) {
    FeatureConfig fc;
    fc.word_ngrams = {1, 1};
    fc.char_ngrams = 6;
    const auto g = extract_grams(toks({"short"}), fc);
    for (const auto& [gram, n] : g) EXPECT_NE(gram.rfind("c:", 0), 0u) << gram;
}

TEST(CharGrams, ExactLengthContributesOne) {
    FeatureConfig fc;
    fc.char_ngrams = 6;
    const auto g = extract_grams(toks({"sixsix"}), fc);
    std::size_t chars = 0;
    for (const auto& [gram, n] : g)
        if (gram.rfind("c:", 0) == 0) chars += n;
    EXPECT_EQ(chars, 1u);
    EXPECT_EQ(g.count("c:sixsix"), 1u);
}

TEST(CharGrams, WithinTokensOnly) {
    FeatureConfig fc;
    fc.char_ngrams = 3;
    const auto g = extract_grams(toks({"ab", "cd"}), fc);
    for (const auto& [gram, n] : g) EXPECT_NE(gram.rfind("c:", 0), 0u) << gram;
}

TEST(Grams, SpaceSplitTokenCountsAsTwoWords) {
    FeatureConfig fc;
    const auto g = extract_grams(toks({"pos ition"}), fc);
    EXPECT_EQ(g.count("w:pos"), 1u);
    EXPECT_EQ(g.count("w:ition"), 1u);
}

TEST(Grams, IgnoredTokensSkipped) {
    FeatureConfig fc;
    fc.word_ngrams = {1, 2};
    fc.ignored_tokens = {"<a>"};
    const auto g = extract_grams(toks({"<a>", "x", "y"}), fc);
    EXPECT_EQ(g.count("w:<a>"), 0u);
    EXPECT_EQ(g.count("w:<a> x"), 0u);
    EXPECT_EQ(g.count("w:x y"), 1u);
}

TEST(Config, InvalidRangesRejected) {
    FeatureConfig fc;
    fc.word_ngrams = {2, 1};
    EXPECT_THROW(fc.validate(), ConfigError);
    fc.word_ngrams = {1, 4};
    EXPECT_THROW(fc.validate(), ConfigError);
    fc.word_ngrams = {1, 1};
    fc.min_df = 0;
    EXPECT_THROW(fc.validate(), ConfigError);
}
