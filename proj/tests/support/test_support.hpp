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

// Hand-built models and small helpers shared by the unit and acceptance
// suites.

#ifndef VEIL_TEST_SUPPORT_HPP
#define VEIL_TEST_SUPPORT_HPP

#include "veil/candidates.hpp"
#include "veil/models.hpp"
#include "veil/rng.hpp"
#include "veil/text.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace veil::testing {

/// Binary unigram model over {are, mean, plain, ugly, you} with labels
/// {A, B}. Row B carries `w_b`, row A `w_a` (zero by default).
inline ClassifierModel ugly_model(const std::map<std::string, double>& w_b, double bias_a = 0.0,
                                  double bias_b = 0.0, const std::map<std::string, double>& w_a = {}) {
    FeatureConfig fc;
    fc.weighting = Weighting::binary;
    const std::vector<std::string> words{"are", "mean", "plain", "ugly", "you"};
    std::vector<std::string> grams;
    for (const auto& w : words) grams.push_back("w:" + w);
    auto space = FeatureSpace::from_parts(fc, grams, std::vector<double>(grams.size(), 1.0), 1);
    std::vector<double> weights(2 * words.size(), 0.0);
    for (std::size_t j = 0; j < words.size(); ++j) {
        if (const auto it = w_a.find(words[j]); it != w_a.end()) weights[j] = it->second;
        if (const auto it = w_b.find(words[j]); it != w_b.end()) weights[words.size() + j] = it->second;
    }
    return ClassifierModel(ModelKind::logreg, std::move(space), {"A", "B"}, std::move(weights), {bias_a, bias_b});
}

/// cos(ugly, plain) = 0.8, cos(ugly, mean) = 0.8; "you" and "are" have no
/// neighbour above 0.7.
inline EmbeddingTable ugly_embeddings(bool with_mean = true) {
    EmbeddingTable t(3);
    t.add("ugly", {1.0, 0.0, 0.0});
    t.add("plain", {0.8, 0.6, 0.0});
    if (with_mean) t.add("mean", {0.8, -0.6, 0.0});
    t.add("you", {0.0, 0.0, 1.0});
    t.add("are", {0.0, 0.7, -0.7});
    return t;
}

inline Tokens toks(std::initializer_list<const char*> list) { return Tokens(list.begin(), list.end()); }

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("veil-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Random lowercase-word documents over a small vocabulary.
inline Tokens random_tokens(Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
    const std::size_t len = min_len + rng.uniform_index(max_len - min_len + 1);
    Tokens t;
    for (std::size_t i = 0; i < len; ++i) t.push_back("w" + std::to_string(rng.uniform_index(vocab)));
    return t;
}

} // namespace veil::testing

#endif // VEIL_TEST_SUPPORT_HPP
