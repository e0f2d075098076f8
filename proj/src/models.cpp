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

#include "veil/models.hpp"

#include "veil/error.hpp"
#include "veil/metrics.hpp"
#include "veil/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace veil {

using json = nlohmann::json;

ModelKind parse_model_kind(std::string_view name) {
    if (name == "logreg") return ModelKind::logreg;
    if (name == "linsvm") return ModelKind::linsvm;
    if (name == "nb_multinomial") return ModelKind::nb_multinomial;
    if (name == "nb_gaussian") return ModelKind::nb_gaussian;
    if (name == "nbsvm") return ModelKind::nbsvm;
    throw ConfigError("unknown classifier '" + std::string(name) + "'");
}

Loss parse_loss(std::string_view name) {
    if (name == "log") return Loss::log;
    if (name == "hinge") return Loss::hinge;
    if (name == "squared_hinge") return Loss::squared_hinge;
    throw ConfigError("unknown loss '" + std::string(name) + "'");
}

ClassWeight parse_class_weight(std::string_view name) {
    if (name == "uniform") return ClassWeight::uniform;
    if (name == "balanced") return ClassWeight::balanced;
    throw ConfigError("unknown class weighting '" + std::string(name) + "'");
}

ModelRole parse_model_role(std::string_view name) {
    if (name == "substitute") return ModelRole::substitute;
    if (name == "target") return ModelRole::target;
    if (name == "unspecified") return ModelRole::unspecified;
    throw ConfigError("unknown model role '" + std::string(name) + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::linsvm: return "linsvm";
    case ModelKind::nb_multinomial: return "nb_multinomial";
    case ModelKind::nb_gaussian: return "nb_gaussian";
    case ModelKind::nbsvm: return "nbsvm";
    }
    return "?";
}

std::string to_string(Loss loss) {
    switch (loss) {
    case Loss::log: return "log";
    case Loss::hinge: return "hinge";
    case Loss::squared_hinge: return "squared_hinge";
    }
    return "?";
}

std::string to_string(ClassWeight cw) { return cw == ClassWeight::uniform ? "uniform" : "balanced"; }

std::string to_string(ModelRole role) {
    switch (role) {
    case ModelRole::substitute: return "substitute";
    case ModelRole::target: return "target";
    case ModelRole::unspecified: return "unspecified";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (!(C > 0.0)) throw ConfigError("C must be positive");
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("learning-rate decay must lie in (0, 1]");
}

// ---------------------------------------------------------------------------
// ClassifierModel

ClassifierModel::ClassifierModel(ModelKind kind, FeatureSpace space, std::vector<std::string> labels,
                                 std::vector<double> weights, std::vector<double> bias, ModelRole role)
    : kind_(kind), role_(role), space_(std::move(space)), labels_(std::move(labels)),
      weights_(std::move(weights)), bias_(std::move(bias)) {
    if (labels_.empty()) throw ConfigError("a model needs at least one label");
    if (!std::is_sorted(labels_.begin(), labels_.end()) ||
        std::adjacent_find(labels_.begin(), labels_.end()) != labels_.end())
        throw ConfigError("model labels must be sorted and distinct");
    if (weights_.size() != labels_.size() * space_.size()) throw ConfigError("weight matrix has the wrong shape");
    if (bias_.size() != labels_.size()) throw ConfigError("bias vector has the wrong length");
}

ClassifierModel ClassifierModel::gaussian(FeatureSpace space, std::vector<std::string> labels,
                                          std::vector<double> mean, std::vector<double> var,
                                          std::vector<double> bias, ModelRole role) {
    const std::size_t cells = labels.size() * space.size();
    if (mean.size() != cells || var.size() != cells) throw ConfigError("gaussian parameters have the wrong shape");
    if (std::any_of(var.begin(), var.end(), [](double v) { return !(v > 0.0); }))
        throw ConfigError("gaussian variances must be positive");
    std::vector<double> zeros(cells, 0.0);
    ClassifierModel m(ModelKind::nb_gaussian, std::move(space), std::move(labels), std::move(zeros),
                      std::move(bias), role);
    m.mean_ = std::move(mean);
    m.var_ = std::move(var);
    return m;
}

std::span<const double> ClassifierModel::row(std::size_t label) const {
    return std::span<const double>(weights_).subspan(label * space_.size(), space_.size());
}

std::optional<std::size_t> ClassifierModel::label_index(std::string_view label) const {
    const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<double> ClassifierModel::logits(const SparseVector& x) const {
    queries_.bump();
    std::vector<double> out(bias_);
    const std::size_t cols = space_.size();
    if (kind_ == ModelKind::nb_gaussian) {
        for (std::size_t c = 0; c < labels_.size(); ++c)
            for (const auto& e : x) {
                const double mu = mean_[c * cols + e.index], v = var_[c * cols + e.index];
                out[c] += (2.0 * e.value * mu - e.value * e.value) / (2.0 * v);
            }
        return out;
    }
    for (std::size_t c = 0; c < labels_.size(); ++c) out[c] += x.dot(row(c));
    return out;
}

std::vector<double> ClassifierModel::logits(std::span<const std::string> tokens) const {
    return logits(space_.transform(tokens));
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::size_t ClassifierModel::predict_index(std::span<const std::string> tokens) const {
    return argmax(logits(tokens));
}

const std::string& ClassifierModel::predict(std::span<const std::string> tokens) const {
    return labels_[predict_index(tokens)];
}

// ---------------------------------------------------------------------------
// Optimization

double loss_value(Loss loss, double m) {
    switch (loss) {
    case Loss::log: return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    case Loss::hinge: return std::max(0.0, 1.0 - m);
    case Loss::squared_hinge: {
        const double h = std::max(0.0, 1.0 - m);
        return h * h;
    }
    }
    return 0.0;
}

double loss_derivative(Loss loss, double m) {
    switch (loss) {
    case Loss::log: {
        if (m > 0) {
            const double e = std::exp(-m);
            return -e / (1.0 + e);
        }
        return -1.0 / (1.0 + std::exp(m));
    }
    case Loss::hinge: return m < 1.0 ? -1.0 : 0.0;
    case Loss::squared_hinge: return m < 1.0 ? -2.0 * (1.0 - m) : 0.0;
    }
    return 0.0;
}

namespace {

double l2_strength(const BinaryProblem& p) { return 1.0 / (p.C * static_cast<double>(p.x.size())); }

// Upper bound on the loss curvature, used to damp steps on long documents.
double curvature(Loss loss) {
    switch (loss) {
    case Loss::log: return 0.25;
    case Loss::hinge: return 0.0;
    case Loss::squared_hinge: return 2.0;
    }
    return 0.0;
}

} // namespace

double objective(const BinaryProblem& p, std::span<const double> w, double b) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.x.size(); ++i)
        total += p.sample_weight[i] * loss_value(p.loss, p.y[i] * (p.x[i].dot(w) + b));
    double norm = 0.0;
    for (const double v : w) norm += v * v;
    return total / static_cast<double>(p.x.size()) + 0.5 * l2_strength(p) * norm;
}

void objective_gradient(const BinaryProblem& p, std::span<const double> w, double b, std::span<double> grad_w,
                        double& grad_b) {
    const double n = static_cast<double>(p.x.size());
    const double lambda = l2_strength(p);
    for (std::size_t j = 0; j < grad_w.size(); ++j) grad_w[j] = lambda * w[j];
    grad_b = 0.0;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        const double g = p.sample_weight[i] * loss_derivative(p.loss, p.y[i] * (p.x[i].dot(w) + b)) * p.y[i] / n;
        for (const auto& e : p.x[i]) grad_w[e.index] += g * e.value;
        grad_b += g;
    }
}

LinearFit sgd_fit(const BinaryProblem& p, const TrainConfig& config) {
    config.validate();
    if (p.x.empty()) throw TrainingError("no training documents");
    const double lambda = l2_strength(p);
    const double kappa = curvature(p.loss);

    // w = scale * v, so the L2 shrink is O(1) per step.
    std::vector<double> v(p.n_features, 0.0);
    double scale = 1.0, b = 0.0;
    std::vector<std::size_t> order(p.x.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(config.seed);

    double eta_epoch = config.learning_rate;
    for (int epoch = 0; epoch < config.epochs; ++epoch, eta_epoch *= config.lr_decay) {
        rng.shuffle(order);
        for (const std::size_t i : order) {
            const auto& x = p.x[i];
            const double sw = p.sample_weight[i];
            const double eta = eta_epoch / (1.0 + eta_epoch * kappa * sw * (x.squared_norm() + 1.0));
            const double z = scale * x.dot(v) + b;
            const double g = sw * loss_derivative(p.loss, p.y[i] * z) * p.y[i];
            scale *= 1.0 - eta * lambda;
            if (g != 0.0) {
                const double step = -eta * g / scale;
                for (const auto& e : x) v[e.index] += step * e.value;
                b -= eta * g;
            }
            if (scale < 1e-9) {
                for (auto& vj : v) vj *= scale;
                scale = 1.0;
            }
        }
        if (!std::isfinite(b) || !std::isfinite(scale))
            throw TrainingError("training diverged (non-finite parameters)");
    }

    LinearFit fit;
    fit.w.resize(p.n_features);
    for (std::size_t j = 0; j < v.size(); ++j) fit.w[j] = v[j] * scale;
    fit.b = b;
    if (!std::isfinite(objective(p, fit.w, fit.b))) throw TrainingError("training produced a non-finite loss");
    return fit;
}

std::vector<double> class_weights(std::span<const std::size_t> labels, std::size_t n_labels, ClassWeight cw) {
    std::vector<double> out(labels.size(), 1.0);
    if (cw == ClassWeight::uniform) return out;
    std::vector<std::size_t> counts(n_labels, 0);
    for (const auto l : labels) ++counts[l];
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = static_cast<double>(labels.size()) /
                 (static_cast<double>(n_labels) * static_cast<double>(counts[labels[i]]));
    return out;
}

std::vector<double> nb_log_count_ratio(std::span<const SparseVector> x, const std::vector<bool>& positive,
                                       std::size_t n_features, double alpha) {
    std::vector<double> p(n_features, alpha), q(n_features, alpha);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (const auto& e : x[i]) (positive[i] ? p : q)[e.index] += e.value;
    const double p_norm = std::accumulate(p.begin(), p.end(), 0.0);
    const double q_norm = std::accumulate(q.begin(), q.end(), 0.0);
    std::vector<double> r(n_features);
    for (std::size_t j = 0; j < n_features; ++j) r[j] = std::log((p[j] / p_norm) / (q[j] / q_norm));
    return r;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Encoded {
    FeatureSpace space;
    std::vector<SparseVector> x;
    std::vector<std::size_t> y;
};

Encoded encode(const LabeledCorpus& corpus, const FeatureConfig& fconfig) {
    if (corpus.labels().size() < 2) throw ConfigError("training needs at least two labels");
    Encoded enc;
    for (const auto& d : corpus.documents())
        if (!d.label) throw ConfigError("training document '" + d.id + "' has no label");
    for (const auto c : corpus.label_counts())
        if (c == 0) throw ConfigError("every label needs at least one training document");
    enc.space = FeatureSpace::fit(corpus, fconfig);
    enc.x.reserve(corpus.size());
    for (const auto& d : corpus.documents()) {
        enc.x.push_back(enc.space.transform(d.tokens));
        enc.y.push_back(*corpus.label_index(*d.label));
    }
    return enc;
}

// One-vs-rest rows. With two labels the second row is trained and the first
// is its exact negation (the mirrored problem yields the negated iterates).
void fit_linear_rows(const std::vector<SparseVector>& x, const std::vector<std::size_t>& y, std::size_t n_labels,
                     std::size_t n_features, const TrainConfig& tconfig, Loss loss, std::vector<double>& weights,
                     std::vector<double>& bias) {
    weights.assign(n_labels * n_features, 0.0);
    bias.assign(n_labels, 0.0);
    BinaryProblem problem;
    problem.x = x;
    problem.n_features = n_features;
    problem.C = tconfig.C;
    problem.loss = loss;
    problem.sample_weight = class_weights(y, n_labels, tconfig.class_weight);
    problem.y.resize(y.size());

    const std::size_t first = n_labels == 2 ? 1 : 0;
    for (std::size_t c = first; c < n_labels; ++c) {
        for (std::size_t i = 0; i < y.size(); ++i) problem.y[i] = y[i] == c ? 1.0 : -1.0;
        const auto fit = sgd_fit(problem, tconfig);
        std::copy(fit.w.begin(), fit.w.end(), weights.begin() + static_cast<std::ptrdiff_t>(c * n_features));
        bias[c] = fit.b;
    }
    if (n_labels == 2) {
        for (std::size_t j = 0; j < n_features; ++j) weights[j] = -weights[n_features + j];
        bias[0] = -bias[1];
    }
}

ClassifierModel train_multinomial(Encoded enc, const std::vector<std::string>& labels) {
    const std::size_t L = labels.size(), V = enc.space.size();
    std::vector<double> counts(L * V, 0.0), totals(L, 0.0), docs(L, 0.0);
    for (std::size_t i = 0; i < enc.x.size(); ++i) {
        docs[enc.y[i]] += 1.0;
        for (const auto& e : enc.x[i]) {
            counts[enc.y[i] * V + e.index] += e.value;
            totals[enc.y[i]] += e.value;
        }
    }
    constexpr double alpha = 1.0;
    std::vector<double> weights(L * V), bias(L);
    for (std::size_t c = 0; c < L; ++c) {
        bias[c] = std::log(docs[c] / static_cast<double>(enc.x.size()));
        const double denom = totals[c] + alpha * static_cast<double>(V);
        for (std::size_t j = 0; j < V; ++j) weights[c * V + j] = std::log((counts[c * V + j] + alpha) / denom);
    }
    return ClassifierModel(ModelKind::nb_multinomial, std::move(enc.space), labels, std::move(weights),
                           std::move(bias));
}

ClassifierModel train_gaussian(Encoded enc, const std::vector<std::string>& labels) {
    const std::size_t L = labels.size(), V = enc.space.size();
    std::vector<double> mean(L * V, 0.0), sq(L * V, 0.0), docs(L, 0.0);
    for (std::size_t i = 0; i < enc.x.size(); ++i) {
        docs[enc.y[i]] += 1.0;
        for (const auto& e : enc.x[i]) {
            mean[enc.y[i] * V + e.index] += e.value;
            sq[enc.y[i] * V + e.index] += e.value * e.value;
        }
    }
    std::vector<double> var(L * V);
    double max_var = 0.0;
    for (std::size_t c = 0; c < L; ++c)
        for (std::size_t j = 0; j < V; ++j) {
            const std::size_t k = c * V + j;
            mean[k] /= docs[c];
            var[k] = std::max(0.0, sq[k] / docs[c] - mean[k] * mean[k]);
            max_var = std::max(max_var, var[k]);
        }
    const double epsilon = max_var > 0.0 ? 1e-9 * max_var : 1e-9;
    for (auto& v : var) v += epsilon;

    constexpr double log_two_pi = 1.8378770664093453;
    std::vector<double> bias(L);
    for (std::size_t c = 0; c < L; ++c) {
        double b = std::log(docs[c] / static_cast<double>(enc.x.size()));
        for (std::size_t j = 0; j < V; ++j) {
            const std::size_t k = c * V + j;
            b -= 0.5 * (log_two_pi + std::log(var[k])) + mean[k] * mean[k] / (2.0 * var[k]);
        }
        bias[c] = b;
    }
    return ClassifierModel::gaussian(std::move(enc.space), labels, std::move(mean), std::move(var),
                                     std::move(bias));
}

} // namespace

ClassifierModel train(const LabeledCorpus& corpus, const FeatureConfig& fconfig, const TrainConfig& tconfig,
                      ModelKind kind) {
    tconfig.validate();
    if (kind == ModelKind::nbsvm) return train_nbsvm(corpus, fconfig, tconfig);
    auto enc = encode(corpus, fconfig);
    const auto& labels = corpus.labels();
    switch (kind) {
    case ModelKind::nb_multinomial: return train_multinomial(std::move(enc), labels);
    case ModelKind::nb_gaussian: return train_gaussian(std::move(enc), labels);
    case ModelKind::logreg:
    case ModelKind::linsvm: {
        Loss loss = Loss::log;
        if (kind == ModelKind::linsvm) loss = tconfig.loss == Loss::log ? Loss::squared_hinge : tconfig.loss;
        std::vector<double> weights, bias;
        fit_linear_rows(enc.x, enc.y, labels.size(), enc.space.size(), tconfig, loss, weights, bias);
        return ClassifierModel(kind, std::move(enc.space), labels, std::move(weights), std::move(bias));
    }
    case ModelKind::nbsvm: break;
    }
    throw ConfigError("unsupported classifier");
}

ClassifierModel train_nbsvm(const LabeledCorpus& corpus, const FeatureConfig& fconfig, const TrainConfig& tconfig) {
    tconfig.validate();
    if (corpus.labels().size() != 2) throw ConfigError("NBSVM needs exactly two labels");
    auto enc = encode(corpus, fconfig);
    const std::size_t V = enc.space.size();

    std::vector<bool> positive(enc.y.size());
    for (std::size_t i = 0; i < enc.y.size(); ++i) positive[i] = enc.y[i] == 1;
    const auto r = nb_log_count_ratio(enc.x, positive, V);

    std::vector<SparseVector> scaled;
    scaled.reserve(enc.x.size());
    for (const auto& x : enc.x) {
        std::vector<SparseVector::Entry> entries;
        for (const auto& e : x) entries.push_back({e.index, e.value * r[e.index]});
        scaled.emplace_back(std::move(entries));
    }
    std::vector<double> weights, bias;
    fit_linear_rows(scaled, enc.y, 2, V, tconfig, tconfig.loss, weights, bias);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t j = 0; j < V; ++j) weights[c * V + j] *= r[j];
    return ClassifierModel(ModelKind::nbsvm, std::move(enc.space), corpus.labels(), std::move(weights),
                           std::move(bias));
}

// ---------------------------------------------------------------------------
// Grid search

std::vector<std::vector<std::size_t>> stratified_folds(const LabeledCorpus& corpus, int k) {
    if (k < 2) throw ConfigError("need at least 2 folds");
    const auto counts = corpus.label_counts();
    for (std::size_t l = 0; l < counts.size(); ++l)
        if (counts[l] < static_cast<std::size_t>(k))
            throw ConfigError("fold infeasible: label '" + corpus.labels()[l] + "' has " + std::to_string(counts[l]) +
                              " documents for " + std::to_string(k) + " folds");
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::vector<std::size_t> dealt(counts.size(), 0);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& d = corpus[i];
        if (!d.label) throw ConfigError("cross-validation needs labelled documents");
        const auto l = *corpus.label_index(*d.label);
        folds[dealt[l]++ % folds.size()].push_back(i);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

namespace {

LabeledCorpus subset(const LabeledCorpus& corpus, const std::vector<std::size_t>& idx, bool complement) {
    std::vector<bool> pick(corpus.size(), complement);
    for (const auto i : idx) pick[i] = !complement;
    std::vector<Document> docs;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (pick[i]) docs.push_back(corpus[i]);
    return LabeledCorpus(std::move(docs), corpus.labels());
}

double score_predictions(const ClassifierModel& model, const LabeledCorpus& test, const std::string& positive) {
    std::vector<std::string> preds, gold;
    for (const auto& d : test.documents()) {
        preds.push_back(model.predict(d.tokens));
        gold.push_back(*d.label);
    }
    if (test.labels().size() == 2) return f1_score(preds, gold, positive);
    return macro_f1(preds, gold, test.labels());
}

// Linear models reuse one encoding per (fold, feature config); the grid has
// far fewer feature configs than candidates.
std::vector<double> cross_validate(const LabeledCorpus& corpus, const GridSpec& grid, ModelKind kind,
                                   const std::string& positive) {
    const auto folds = stratified_folds(corpus, grid.inner_folds);
    std::vector<double> sums(grid.candidates.size(), 0.0);
    const bool linear = kind == ModelKind::logreg || kind == ModelKind::linsvm;
    const auto& labels = corpus.labels();

    std::vector<bool> done(grid.candidates.size(), false);
    for (std::size_t lead = 0; lead < grid.candidates.size(); ++lead) {
        if (done[lead]) continue;
        std::vector<std::size_t> group;
        for (std::size_t c = lead; c < grid.candidates.size(); ++c)
            if (!done[c] && grid.candidates[c].features == grid.candidates[lead].features) {
                group.push_back(c);
                done[c] = true;
            }
        for (const auto& fold : folds) {
            const auto train_part = subset(corpus, fold, true);
            const auto test_part = subset(corpus, fold, false);
            if (!linear) {
                for (const auto c : group) {
                    const auto model = train(train_part, grid.candidates[c].features, grid.candidates[c].train, kind);
                    sums[c] += score_predictions(model, test_part, positive);
                }
                continue;
            }
            const auto enc = encode(train_part, grid.candidates[lead].features);
            std::vector<SparseVector> test_x;
            std::vector<std::string> gold;
            for (const auto& d : test_part.documents()) {
                test_x.push_back(enc.space.transform(d.tokens));
                gold.push_back(*d.label);
            }
            const std::size_t V = enc.space.size();
            for (const auto c : group) {
                const auto& tc = grid.candidates[c].train;
                tc.validate();
                Loss loss = Loss::log;
                if (kind == ModelKind::linsvm) loss = tc.loss == Loss::log ? Loss::squared_hinge : tc.loss;
                std::vector<double> weights, bias;
                fit_linear_rows(enc.x, enc.y, labels.size(), V, tc, loss, weights, bias);
                std::vector<std::string> preds;
                std::vector<double> logit(labels.size());
                for (const auto& x : test_x) {
                    for (std::size_t l = 0; l < labels.size(); ++l)
                        logit[l] = x.dot(std::span<const double>(weights).subspan(l * V, V)) + bias[l];
                    preds.push_back(labels[argmax(logit)]);
                }
                sums[c] += labels.size() == 2 ? f1_score(preds, gold, positive) : macro_f1(preds, gold, labels);
            }
        }
    }
    for (auto& s : sums) s /= static_cast<double>(folds.size());
    return sums;
}

std::size_t best_of(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

} // namespace

GridResult grid_search(const LabeledCorpus& corpus, const GridSpec& grid, ModelKind kind) {
    if (grid.candidates.empty()) throw ConfigError("grid has no candidates");
    if (grid.inner_folds < 2 || grid.outer_folds < 2) throw ConfigError("grid search needs at least 2 folds");
    if (corpus.labels().size() < 2) throw ConfigError("grid search needs at least two labels");
    const std::string positive = grid.positive_label.value_or(corpus.labels().back());
    if (!corpus.label_index(positive)) throw ConfigError("positive label '" + positive + "' not in corpus");

    std::vector<double> outer;
    for (const auto& fold : stratified_folds(corpus, grid.outer_folds)) {
        const auto train_part = subset(corpus, fold, true);
        const auto scores = cross_validate(train_part, grid, kind, positive);
        const auto& cand = grid.candidates[best_of(scores)];
        const auto model = train(train_part, cand.features, cand.train, kind);
        outer.push_back(score_predictions(model, subset(corpus, fold, false), positive));
    }

    auto scores = cross_validate(corpus, grid, kind, positive);
    const auto best = best_of(scores);
    auto model = train(corpus, grid.candidates[best].features, grid.candidates[best].train, kind);
    return GridResult{std::move(model), best, std::move(scores), std::move(outer)};
}

std::vector<GridCandidate> default_svm_grid() {
    std::vector<GridCandidate> grid;
    for (int hi = 1; hi <= 3; ++hi)
        for (const auto cw : {ClassWeight::uniform, ClassWeight::balanced})
            for (const auto loss : {Loss::hinge, Loss::squared_hinge})
                for (int e = -3; e <= 3; ++e) {
                    GridCandidate c;
                    c.features.word_ngrams = {1, hi};
                    c.features.weighting = Weighting::binary;
                    c.train.class_weight = cw;
                    c.train.loss = loss;
                    c.train.C = std::pow(10.0, e);
                    grid.push_back(c);
                }
    return grid;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json features_to_json(const FeatureSpace& s) {
    const auto& c = s.config();
    return {{"word_ngrams", {c.word_ngrams.lo, c.word_ngrams.hi}},
            {"char_ngrams", c.char_ngrams ? json(*c.char_ngrams) : json(nullptr)},
            {"weighting", to_string(c.weighting)},
            {"sublinear_tf", c.sublinear_tf},
            {"min_df", c.min_df},
            {"max_df_fraction", c.max_df_fraction},
            {"l2_normalize", c.l2_normalize},
            {"ignored_tokens", c.ignored_tokens},
            {"n_docs_fit", s.n_docs_fit()},
            {"grams", s.grams()},
            {"idf", s.idf()}};
}

FeatureSpace features_from_json(const json& j) {
    FeatureConfig c;
    c.word_ngrams = {j.at("word_ngrams").at(0).get<int>(), j.at("word_ngrams").at(1).get<int>()};
    if (!j.at("char_ngrams").is_null()) c.char_ngrams = j.at("char_ngrams").get<int>();
    c.weighting = parse_weighting(j.at("weighting").get<std::string>());
    c.sublinear_tf = j.at("sublinear_tf").get<bool>();
    c.min_df = j.at("min_df").get<int>();
    c.max_df_fraction = j.at("max_df_fraction").get<double>();
    c.l2_normalize = j.at("l2_normalize").get<bool>();
    c.ignored_tokens = j.at("ignored_tokens").get<std::vector<std::string>>();
    c.validate();
    return FeatureSpace::from_parts(std::move(c), j.at("grams").get<std::vector<std::string>>(),
                                    j.at("idf").get<std::vector<double>>(), j.at("n_docs_fit").get<std::size_t>());
}

} // namespace

std::string serialize_model(const ClassifierModel& m) {
    json j = {{"format", "veil-model"},
              {"format_version", kModelFormatVersion},
              {"kind", to_string(m.kind())},
              {"role", to_string(m.role())},
              {"labels", m.labels()},
              {"features", features_to_json(m.space())},
              {"bias", m.bias()}};
    if (m.kind() == ModelKind::nb_gaussian) {
        j["gaussian"] = {{"mean", m.gaussian_mean()}, {"var", m.gaussian_var()}};
    } else {
        json rows = json::array();
        for (std::size_t c = 0; c < m.labels().size(); ++c) {
            const auto r = m.row(c);
            rows.push_back(std::vector<double>(r.begin(), r.end()));
        }
        j["weights"] = std::move(rows);
    }
    return j.dump() + "\n";
}

ClassifierModel deserialize_model(std::string_view content) {
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error& e) {
        throw CorruptFileError(std::string("model file is corrupt: ") + e.what());
    }
    try {
        if (!j.is_object() || j.value("format", "") != "veil-model")
            throw CorruptFileError("not a veil model file");
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) throw FormatVersionError(version, kModelFormatVersion);
        const auto kind = parse_model_kind(j.at("kind").get<std::string>());
        const auto role = parse_model_role(j.at("role").get<std::string>());
        auto labels = j.at("labels").get<std::vector<std::string>>();
        auto space = features_from_json(j.at("features"));
        auto bias = j.at("bias").get<std::vector<double>>();
        if (kind == ModelKind::nb_gaussian) {
            return ClassifierModel::gaussian(std::move(space), std::move(labels),
                                             j.at("gaussian").at("mean").get<std::vector<double>>(),
                                             j.at("gaussian").at("var").get<std::vector<double>>(), std::move(bias),
                                             role);
        }
        std::vector<double> weights;
        for (const auto& row : j.at("weights")) {
            const auto r = row.get<std::vector<double>>();
            if (r.size() != space.size()) throw CorruptFileError("weight row length does not match the feature space");
            weights.insert(weights.end(), r.begin(), r.end());
        }
        return ClassifierModel(kind, std::move(space), std::move(labels), std::move(weights), std::move(bias), role);
    } catch (const json::exception& e) {
        throw CorruptFileError(std::string("model file is corrupt: ") + e.what());
    } catch (const ConfigError& e) {
        throw CorruptFileError(std::string("model file is corrupt: ") + e.what());
    }
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model '" + path.string() + "'");
    out << serialize_model(model);
    if (!out) throw Error("failed writing model '" + path.string() + "'");
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

} // namespace veil
