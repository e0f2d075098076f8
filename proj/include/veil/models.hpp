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

#ifndef VEIL_MODELS_HPP
#define VEIL_MODELS_HPP

#include "veil/features.hpp"
#include "veil/text.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace veil {

enum class ModelKind { logreg, linsvm, nb_multinomial, nb_gaussian, nbsvm };
enum class Loss { log, hinge, squared_hinge };
enum class ClassWeight { uniform, balanced };
enum class ModelRole { substitute, target, unspecified };

ModelKind parse_model_kind(std::string_view name);
Loss parse_loss(std::string_view name);
ClassWeight parse_class_weight(std::string_view name);
ModelRole parse_model_role(std::string_view name);
std::string to_string(ModelKind kind);
std::string to_string(Loss loss);
std::string to_string(ClassWeight cw);
std::string to_string(ModelRole role);

struct TrainConfig {
    double C = 1.0;
    Loss loss = Loss::log;
    ClassWeight class_weight = ClassWeight::uniform;
    int epochs = 50;
    double learning_rate = 0.1;
    double lr_decay = 0.9;
    std::uint64_t seed = 0;

    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Counts logit evaluations. Copies start from zero so a copied model has
/// its own history.
class QueryCounter {
public:
    QueryCounter() = default;
    QueryCounter(const QueryCounter&) noexcept {}
    QueryCounter& operator=(const QueryCounter&) noexcept {
        n_ = 0;
        return *this;
    }

    void bump() const noexcept { n_.fetch_add(1, std::memory_order_relaxed); }
    std::uint64_t get() const noexcept { return n_.load(std::memory_order_relaxed); }
    void reset() const noexcept { n_ = 0; }

private:
    mutable std::atomic<std::uint64_t> n_{0};
};

class ClassifierModel {
public:
    /// Linear model: logits = weights * x + bias, weights row-major
    /// (labels.size() rows by space.size() columns).
    ClassifierModel(ModelKind kind, FeatureSpace space, std::vector<std::string> labels,
                    std::vector<double> weights, std::vector<double> bias,
                    ModelRole role = ModelRole::unspecified);

    /// Gaussian Naive Bayes. `bias` holds each class's log prior plus the
    /// x-independent part of its log-likelihood.
    static ClassifierModel gaussian(FeatureSpace space, std::vector<std::string> labels,
                                    std::vector<double> mean, std::vector<double> var,
                                    std::vector<double> bias, ModelRole role = ModelRole::unspecified);

    ModelKind kind() const noexcept { return kind_; }
    ModelRole role() const noexcept { return role_; }
    void set_role(ModelRole role) noexcept { role_ = role; }
    const FeatureSpace& space() const noexcept { return space_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& bias() const noexcept { return bias_; }
    const std::vector<double>& gaussian_mean() const noexcept { return mean_; }
    const std::vector<double>& gaussian_var() const noexcept { return var_; }
    std::size_t n_features() const noexcept { return space_.size(); }
    std::span<const double> row(std::size_t label) const;

    std::optional<std::size_t> label_index(std::string_view label) const;

    std::vector<double> logits(const SparseVector& x) const;
    std::vector<double> logits(std::span<const std::string> tokens) const;
    std::vector<double> logits(const Document& doc) const { return logits(doc.tokens); }

    /// Argmax of logits; ties go to the earlier label.
    std::size_t predict_index(std::span<const std::string> tokens) const;
    const std::string& predict(std::span<const std::string> tokens) const;
    const std::string& predict(const Document& doc) const { return predict(doc.tokens); }

    /// Number of logit evaluations since construction or the last reset.
    std::uint64_t query_count() const noexcept { return queries_.get(); }
    void reset_query_count() const noexcept { queries_.reset(); }

private:
    ClassifierModel() = default;

    ModelKind kind_ = ModelKind::logreg;
    ModelRole role_ = ModelRole::unspecified;
    FeatureSpace space_;
    std::vector<std::string> labels_;
    std::vector<double> weights_;
    std::vector<double> bias_;
    std::vector<double> mean_;
    std::vector<double> var_;
    QueryCounter queries_;
};

std::size_t argmax(std::span<const double> values);

// Binary linear learning problem shared by SGD training and the analytic
// gradient. Targets are +1/-1; the L2 strength is 1 / (C * N).
struct BinaryProblem {
    std::vector<SparseVector> x;
    std::vector<double> y;
    std::vector<double> sample_weight;
    std::size_t n_features = 0;
    double C = 1.0;
    Loss loss = Loss::log;
};

double loss_value(Loss loss, double margin);
/// Derivative of the loss with respect to the margin.
double loss_derivative(Loss loss, double margin);

/// Mean weighted loss plus (lambda / 2) * ||w||^2.
double objective(const BinaryProblem& problem, std::span<const double> w, double b);
void objective_gradient(const BinaryProblem& problem, std::span<const double> w, double b,
                        std::span<double> grad_w, double& grad_b);

struct LinearFit {
    std::vector<double> w;
    double b = 0.0;
};

/// Seeded SGD over `problem`; throws TrainingError on non-finite parameters.
LinearFit sgd_fit(const BinaryProblem& problem, const TrainConfig& config);

/// Per-sample weights for `labels` (indices) under `cw`.
std::vector<double> class_weights(std::span<const std::size_t> labels, std::size_t n_labels,
                                  ClassWeight cw);

/// Naive Bayes log-count ratios r = ln((p/|p|_1) / (q/|q|_1)) with
/// p = alpha + sum of positive rows and q = alpha + sum of negative rows.
std::vector<double> nb_log_count_ratio(std::span<const SparseVector> x, const std::vector<bool>& positive,
                                       std::size_t n_features, double alpha = 1.0);

ClassifierModel train(const LabeledCorpus& corpus, const FeatureConfig& fconfig,
                      const TrainConfig& tconfig, ModelKind kind);
ClassifierModel train_nbsvm(const LabeledCorpus& corpus, const FeatureConfig& fconfig,
                            const TrainConfig& tconfig);

struct GridCandidate {
    FeatureConfig features;
    TrainConfig train;
};

struct GridSpec {
    std::vector<GridCandidate> candidates;
    int inner_folds = 10;
    int outer_folds = 3;
    std::optional<std::string> positive_label;  // defaults to the last label
};

struct GridResult {
    ClassifierModel best;
    std::size_t best_index = 0;
    std::vector<double> scores;        // mean inner-fold F1 per candidate
    std::vector<double> outer_scores;  // nested estimate, one per outer fold
};

/// Stratified k-fold assignment without shuffling: documents of each label
/// are dealt to folds round-robin in corpus order. Returns test-fold indices.
std::vector<std::vector<std::size_t>> stratified_folds(const LabeledCorpus& corpus, int k);

GridResult grid_search(const LabeledCorpus& corpus, const GridSpec& grid, ModelKind kind);

/// The SVM/NBSVM search grid: word ranges (1,1)..(1,3) over binary
/// features, uniform/balanced weighting, hinge/squared hinge, C in 1e-3..1e3.
std::vector<GridCandidate> default_svm_grid();

inline constexpr int kModelFormatVersion = 1;

void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);
std::string serialize_model(const ClassifierModel& model);
ClassifierModel deserialize_model(std::string_view content);

} // namespace veil

#endif // VEIL_MODELS_HPP
