#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sdcaudit/data.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/hyperparameters.hpp"
#include "sdcaudit/matrix.hpp"
#include "sdcaudit/random.hpp"

namespace sdcaudit {

/// Anything that maps one encoded record to a row of class probabilities.
template <typename M>
concept ProbabilisticClassifier = requires(const M& m, std::span<const double> row) {
  { m.predict_row(row) } -> std::convertible_to<std::vector<double>>;
  { m.n_classes() } -> std::convertible_to<std::size_t>;
};

struct TreeParams {
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = 0;  // 0 = every feature
};

/// CART classification tree grown with the Gini criterion. Records go left
/// when value <= threshold. Among equal-gain splits the lowest feature index,
/// then the lowest threshold, wins.
class DecisionTree {
 public:
  struct Node {
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    bool leaf = true;
    std::vector<double> probabilities;
  };

  /// `samples` may repeat indices: bootstrap draws count with multiplicity in
  /// impurities and leaf frequencies, while min_samples_leaf/min_samples_split
  /// count distinct records.
  /// `rng` is only consulted when params.features_per_split is set.
  static DecisionTree grow(const Matrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                           std::vector<std::size_t> samples, const TreeParams& params, Rng* rng = nullptr) {
    DecisionTree tree;
    tree.n_classes_ = n_classes;
    tree.n_features_ = x.cols();
    struct Pending {
      std::size_t node;
      std::vector<std::size_t> samples;
      std::size_t depth;
    };
    std::vector<Pending> stack;
    tree.nodes_.push_back(Node{});
    stack.push_back({0, std::move(samples), 0});
    while (!stack.empty()) {
      Pending job = std::move(stack.back());
      stack.pop_back();
      auto counts = class_counts(labels, job.samples, n_classes);
      {
        Node& node = tree.nodes_[job.node];
        node.probabilities.resize(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) {
          node.probabilities[c] = counts[c] / static_cast<double>(job.samples.size());
        }
      }
      const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
      const bool depth_exhausted = params.max_depth != 0 && job.depth >= params.max_depth;
      const auto distinct = distinct_count(job.samples);
      if (pure || depth_exhausted || distinct < params.min_samples_split || distinct < 2 * params.min_samples_leaf) {
        continue;
      }
      auto best = best_split(x, labels, n_classes, job.samples, counts, params, rng);
      if (!best) continue;

      std::vector<std::size_t> left, right;
      for (auto i : job.samples) {
        (x(i, best->feature) <= best->threshold ? left : right).push_back(i);
      }
      const std::size_t left_id = tree.nodes_.size();
      tree.nodes_.push_back(Node{});
      tree.nodes_.push_back(Node{});
      Node& node = tree.nodes_[job.node];
      node.leaf = false;
      node.feature = best->feature;
      node.threshold = best->threshold;
      node.left = left_id;
      node.right = left_id + 1;
      stack.push_back({left_id + 1, std::move(right), job.depth + 1});
      stack.push_back({left_id, std::move(left), job.depth + 1});
    }
    return tree;
  }

  const std::vector<double>& leaf_probabilities(std::span<const double> row) const {
    std::size_t id = 0;
    while (!nodes_[id].leaf) {
      const Node& n = nodes_[id];
      id = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes_[id].probabilities;
  }

  std::vector<double> predict_row(std::span<const double> row) const { return leaf_probabilities(row); }
  std::size_t n_classes() const { return n_classes_; }
  std::size_t n_features() const { return n_features_; }
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  struct Candidate {
    std::size_t feature;
    double threshold;
  };

  static std::size_t distinct_count(std::vector<std::size_t> samples) {
    std::sort(samples.begin(), samples.end());
    return static_cast<std::size_t>(std::unique(samples.begin(), samples.end()) - samples.begin());
  }

  static std::vector<double> class_counts(std::span<const std::size_t> labels, std::span<const std::size_t> samples,
                                          std::size_t n_classes) {
    std::vector<double> counts(n_classes, 0.0);
    for (auto i : samples) counts[labels[i]] += 1.0;
    return counts;
  }

  // Weighted Gini impurity n*G = n - sum(c^2)/n, so minimising the children's
  // total is maximising sum_k sum_c c^2 / n_k. Counts are exact integers.
  static double purity_score(std::span<const double> counts, double n) {
    double s = 0.0;
    for (double c : counts) s += c * c;
    return s / n;
  }

  static std::optional<Candidate> best_split(const Matrix& x, std::span<const std::size_t> labels,
                                             std::size_t n_classes, std::span<const std::size_t> samples,
                                             const std::vector<double>& total, const TreeParams& params, Rng* rng) {
    std::vector<std::size_t> features;
    if (params.features_per_split == 0 || params.features_per_split >= x.cols() || rng == nullptr) {
      features.resize(x.cols());
      std::iota(features.begin(), features.end(), 0);
    } else {
      features = rng->sample_without_replacement(x.cols(), params.features_per_split);
      std::sort(features.begin(), features.end());
    }

    const double n = static_cast<double>(samples.size());
    const auto min_leaf = params.min_samples_leaf;
    const auto distinct_total = distinct_count(std::vector<std::size_t>(samples.begin(), samples.end()));
    std::optional<Candidate> best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(samples.begin(), samples.end());
    std::vector<double> left(n_classes), right(n_classes);

    for (auto f : features) {
      // Ties broken by record index so that repeated draws sit together.
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(a, f) < x(b, f) || (x(a, f) == x(b, f) && a < b);
      });
      std::fill(left.begin(), left.end(), 0.0);
      right = total;
      std::size_t distinct_left = 0;
      for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        if (pos == 0 || order[pos] != order[pos - 1]) ++distinct_left;
        const auto lab = labels[order[pos]];
        left[lab] += 1.0;
        right[lab] -= 1.0;
        const double lo = x(order[pos], f);
        const double hi = x(order[pos + 1], f);
        if (!(lo < hi)) continue;
        const std::size_t n_left = pos + 1;
        const std::size_t n_right = order.size() - n_left;
        if (distinct_left < min_leaf || distinct_total - distinct_left < min_leaf) continue;
        const double score = purity_score(left, static_cast<double>(n_left)) +
                             purity_score(right, static_cast<double>(n_right));
        if (score > best_score + 1e-12 * n) {
          best_score = score;
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold < hi)) threshold = lo;
          best = Candidate{f, threshold};
        }
      }
    }
    return best;
  }

  std::vector<Node> nodes_;
  std::size_t n_classes_ = 0;
  std::size_t n_features_ = 0;
};

/// Bagged trees; tree t draws its bootstrap sample and split features from
/// Rng(seed + t). Output is the mean of the trees' leaf frequencies.
class RandomForest {
 public:
  static RandomForest grow(const Matrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                           std::span<const std::size_t> train, std::size_t n_estimators, bool bootstrap,
                           TreeParams params, std::uint64_t seed) {
    RandomForest forest;
    forest.n_classes_ = n_classes;
    if (params.features_per_split == 0) {
      params.features_per_split =
          std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols()))));
    }
    for (std::size_t t = 0; t < n_estimators; ++t) {
      Rng rng(seed + t);
      std::vector<std::size_t> sample;
      if (bootstrap) {
        sample.reserve(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) sample.push_back(train[rng.uniform_index(train.size())]);
      } else {
        sample.assign(train.begin(), train.end());
      }
      forest.trees_.push_back(DecisionTree::grow(x, labels, n_classes, std::move(sample), params, &rng));
    }
    return forest;
  }

  std::vector<double> predict_row(std::span<const double> row) const {
    std::vector<double> out(n_classes_, 0.0);
    for (const auto& tree : trees_) {
      const auto& p = tree.leaf_probabilities(row);
      for (std::size_t c = 0; c < n_classes_; ++c) out[c] += p[c];
    }
    for (auto& v : out) v /= static_cast<double>(trees_.size());
    return out;
  }

  std::size_t n_classes() const { return n_classes_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  std::vector<DecisionTree> trees_;
  std::size_t n_classes_ = 0;
};

/// Multinomial logistic regression. Parameters are flattened as the
/// n_classes x n_features weight matrix (row-major) followed by n_classes
/// biases. Objective: mean cross-entropy + l2/2 * ||W||^2 (biases unpenalised).
class LogisticRegression {
 public:
  LogisticRegression(std::size_t n_features, std::size_t n_classes)
      : n_features_(n_features), n_classes_(n_classes), params_((n_features + 1) * n_classes, 0.0) {}

  static std::vector<double> softmax_scores(std::span<const double> params, std::span<const double> row,
                                            std::size_t n_features, std::size_t n_classes) {
    std::vector<double> z(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
      double s = params[n_classes * n_features + c];
      for (std::size_t f = 0; f < n_features; ++f) s += params[c * n_features + f] * row[f];
      z[c] = s;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto& v : z) {
      v = std::exp(v - zmax);
      total += v;
    }
    for (auto& v : z) v /= total;
    return z;
  }

  /// Objective value; fills `gradient` (same layout as params).
  static double loss_and_gradient(std::span<const double> params, const Matrix& x,
                                  std::span<const std::size_t> labels, std::span<const std::size_t> samples,
                                  std::size_t n_classes, double l2, std::vector<double>& gradient) {
    const std::size_t d = x.cols();
    gradient.assign(params.size(), 0.0);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    for (auto i : samples) {
      auto row = x.row(i);
      auto p = softmax_scores(params, row, d, n_classes);
      loss -= std::log(std::max(p[labels[i]], std::numeric_limits<double>::min())) * inv_n;
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double err = (p[c] - (labels[i] == c ? 1.0 : 0.0)) * inv_n;
        for (std::size_t f = 0; f < d; ++f) gradient[c * d + f] += err * row[f];
        gradient[n_classes * d + c] += err;
      }
    }
    for (std::size_t k = 0; k < n_classes * d; ++k) {
      loss += 0.5 * l2 * params[k] * params[k];
      gradient[k] += l2 * params[k];
    }
    return loss;
  }

  /// Full-batch gradient descent from zero weights, fixed step, no line search.
  void fit(const Matrix& x, std::span<const std::size_t> labels, std::span<const std::size_t> samples, double l2,
           double learning_rate, std::size_t max_iterations) {
    std::vector<double> grad;
    for (std::size_t it = 0; it < max_iterations; ++it) {
      loss_and_gradient(params_, x, labels, samples, n_classes_, l2, grad);
      for (std::size_t k = 0; k < params_.size(); ++k) params_[k] -= learning_rate * grad[k];
    }
  }

  std::vector<double> predict_row(std::span<const double> row) const {
    return softmax_scores(params_, row, n_features_, n_classes_);
  }

  std::size_t n_classes() const { return n_classes_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

 private:
  std::size_t n_features_;
  std::size_t n_classes_;
  std::vector<double> params_;
};

inline constexpr std::int64_t kDefaultForestSize = 100;
inline constexpr double kDefaultLearningRate = 0.1;
inline constexpr std::int64_t kDefaultMaxIterations = 200;

inline TreeParams tree_params(const Hyperparameters& h) {
  TreeParams p;
  if (h.has("max_depth") && !std::holds_alternative<std::string>(h.entries.at("max_depth"))) {
    p.max_depth = static_cast<std::size_t>(h.get_int("max_depth", 0));
  }
  p.min_samples_leaf = static_cast<std::size_t>(h.get_int("min_samples_leaf", 1));
  p.min_samples_split = static_cast<std::size_t>(h.get_int("min_samples_split", 2));
  return p;
}

/// A fitted zoo model. `hyperparameters` may be edited after fitting; the
/// digest recorded at fit time is what detects such edits.
struct TrainedModel {
  Hyperparameters hyperparameters;
  std::string fitted_hyperparameter_digest;
  std::string fit_digest;
  std::size_t n_features = 0;
  std::size_t n_classes_ = 0;
  std::variant<DecisionTree, RandomForest, LogisticRegression> state;

  std::size_t n_classes() const { return n_classes_; }

  std::vector<double> predict_row(std::span<const double> row) const {
    return std::visit([&](const auto& m) { return m.predict_row(row); }, state);
  }
};

static_assert(ProbabilisticClassifier<TrainedModel>);
static_assert(ProbabilisticClassifier<DecisionTree>);

/// Digest of the training inputs: schema, the train indices and their rows.
inline std::string training_fingerprint(const Dataset& d, const Split& s) {
  std::string bytes = schema_to_json(d.schema).dump() + "\n";
  for (auto i : s.train_indices) {
    bytes += std::to_string(i) + ":";
    for (double v : d.rows.row(i)) bytes += shortest_repr(v) + ",";
    bytes += std::to_string(d.labels[i]) + "\n";
  }
  return sha256_hex(bytes);
}

inline TrainedModel fit(const Hyperparameters& h, const Dataset& d, const Split& s) {
  validate(h);
  if (h.model_kind == ModelKind::external) {
    throw AuditError(ErrorCode::InvalidHyperparameter, "external models are checked, not fitted");
  }
  if (s.train_indices.empty()) {
    throw AuditError(ErrorCode::DegenerateSplit, "training part is empty");
  }
  const auto first = d.labels[s.train_indices.front()];
  if (std::all_of(s.train_indices.begin(), s.train_indices.end(), [&](auto i) { return d.labels[i] == first; })) {
    throw AuditError(ErrorCode::SingleClassTrainingSet, "every training record has class " + std::to_string(first));
  }

  TrainedModel m;
  m.hyperparameters = h;
  m.fitted_hyperparameter_digest = hyperparameter_digest(h);
  m.fit_digest = sha256_hex(m.fitted_hyperparameter_digest + "\n" + training_fingerprint(d, s));
  m.n_features = d.schema.width();
  m.n_classes_ = d.schema.n_classes;

  switch (h.model_kind) {
    case ModelKind::decision_tree: {
      m.state = DecisionTree::grow(d.rows, d.labels, m.n_classes_, s.train_indices, tree_params(h));
      break;
    }
    case ModelKind::random_forest: {
      m.state = RandomForest::grow(d.rows, d.labels, m.n_classes_, s.train_indices,
                                   static_cast<std::size_t>(h.get_int("n_estimators", kDefaultForestSize)),
                                   h.get_bool("bootstrap", true), tree_params(h), h.seed);
      break;
    }
    case ModelKind::logistic_regression: {
      LogisticRegression lr(m.n_features, m.n_classes_);
      lr.fit(d.rows, d.labels, s.train_indices, h.get_real("l2_penalty", 0.0),
             h.get_real("learning_rate", kDefaultLearningRate),
             static_cast<std::size_t>(h.get_int("max_iterations", kDefaultMaxIterations)));
      m.state = std::move(lr);
      break;
    }
    case ModelKind::external:
      break;
  }
  return m;
}

}  // namespace sdcaudit
