#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "sdcaudit/csv.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/numfmt.hpp"

namespace sdcaudit {

enum class ModelKind { decision_tree, random_forest, logistic_regression, external };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::decision_tree: return "decision_tree";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::logistic_regression: return "logistic_regression";
    case ModelKind::external: return "external";
  }
  return "unknown";
}

inline ModelKind model_kind_from_string(std::string_view name) {
  if (name == "decision_tree") return ModelKind::decision_tree;
  if (name == "random_forest") return ModelKind::random_forest;
  if (name == "logistic_regression") return ModelKind::logistic_regression;
  if (name == "external") return ModelKind::external;
  throw AuditError(ErrorCode::UnrecognisedHyperparameter, "unknown model_kind '" + std::string(name) + "'");
}

using Scalar = std::variant<std::int64_t, double, std::string, bool>;

inline nlohmann::json scalar_to_json(const Scalar& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

inline std::optional<Scalar> scalar_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return Scalar{j.get<bool>()};
  if (j.is_number_integer()) return Scalar{j.get<std::int64_t>()};
  if (j.is_number_float()) return Scalar{j.get<double>()};
  if (j.is_string()) return Scalar{j.get<std::string>()};
  return std::nullopt;
}

/// Hyperparameters of a model. `entries` is a sorted map, so iteration order
/// (and the canonical serialisation) never depends on insertion order.
struct Hyperparameters {
  ModelKind model_kind = ModelKind::decision_tree;
  std::map<std::string, Scalar> entries;
  std::uint64_t seed = 0;

  bool has(const std::string& name) const { return entries.contains(name); }

  std::int64_t get_int(const std::string& name, std::int64_t fallback) const {
    auto it = entries.find(name);
    if (it == entries.end()) return fallback;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
    throw AuditError(ErrorCode::InvalidHyperparameter, name + " must be an integer");
  }

  double get_real(const std::string& name, double fallback) const {
    auto it = entries.find(name);
    if (it == entries.end()) return fallback;
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    throw AuditError(ErrorCode::InvalidHyperparameter, name + " must be a number");
  }

  bool get_bool(const std::string& name, bool fallback) const {
    auto it = entries.find(name);
    if (it == entries.end()) return fallback;
    if (const auto* b = std::get_if<bool>(&it->second)) return *b;
    throw AuditError(ErrorCode::InvalidHyperparameter, name + " must be a boolean");
  }

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Names accepted for each kind. "epsilon" is a reported privacy budget that
/// the rules engine may check; the zoo ignores it when fitting.
inline const std::set<std::string>& recognised_names(ModelKind kind) {
  static const std::set<std::string> tree{"max_depth", "min_samples_leaf", "min_samples_split", "epsilon"};
  static const std::set<std::string> forest{"max_depth",    "min_samples_leaf", "min_samples_split",
                                            "n_estimators", "bootstrap",        "epsilon"};
  static const std::set<std::string> logistic{"l2_penalty", "max_iterations", "learning_rate", "epsilon"};
  static const std::set<std::string> any{};
  switch (kind) {
    case ModelKind::decision_tree: return tree;
    case ModelKind::random_forest: return forest;
    case ModelKind::logistic_regression: return logistic;
    case ModelKind::external: return any;
  }
  return any;
}

/// Rejects unknown names and out-of-range values for the zoo kinds. External
/// models carry arbitrary reported entries and are not validated.
inline void validate(const Hyperparameters& h) {
  if (h.model_kind == ModelKind::external) return;
  const auto& names = recognised_names(h.model_kind);
  for (const auto& [name, value] : h.entries) {
    if (!names.contains(name)) {
      throw AuditError(ErrorCode::UnrecognisedHyperparameter,
                       "'" + name + "' is not a " + std::string(to_string(h.model_kind)) + " hyperparameter");
    }
  }
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw AuditError(ErrorCode::InvalidHyperparameter, what);
  };
  if (h.has("max_depth")) {
    const auto& v = h.entries.at("max_depth");
    const auto* s = std::get_if<std::string>(&v);
    require((s && *s == "unlimited") || h.get_int("max_depth", 1) >= 1, "max_depth must be >= 1 or \"unlimited\"");
  }
  if (h.model_kind != ModelKind::logistic_regression) {
    require(h.get_int("min_samples_leaf", 1) >= 1, "min_samples_leaf must be >= 1");
    require(h.get_int("min_samples_split", 2) >= 2, "min_samples_split must be >= 2");
  }
  if (h.model_kind == ModelKind::random_forest) {
    require(h.get_int("n_estimators", 1) >= 1, "n_estimators must be >= 1");
    h.get_bool("bootstrap", true);
  }
  if (h.model_kind == ModelKind::logistic_regression) {
    require(h.get_real("l2_penalty", 0.0) >= 0.0, "l2_penalty must be >= 0");
    require(h.get_int("max_iterations", 1) >= 1, "max_iterations must be >= 1");
    require(h.get_real("learning_rate", 1.0) > 0.0, "learning_rate must be > 0");
  }
  if (h.has("epsilon")) h.get_real("epsilon", 0.0);
}

inline nlohmann::json to_json(const Hyperparameters& h) {
  nlohmann::json entries = nlohmann::json::object();
  for (const auto& [name, value] : h.entries) entries[name] = scalar_to_json(value);
  return {{"model_kind", to_string(h.model_kind)}, {"seed", h.seed}, {"entries", entries}};
}

inline Hyperparameters hyperparameters_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("model_kind") || !j["model_kind"].is_string()) {
    throw AuditError(ErrorCode::UnrecognisedHyperparameter, "model config needs a string model_kind");
  }
  Hyperparameters h;
  h.model_kind = model_kind_from_string(j["model_kind"].get<std::string>());
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw AuditError(ErrorCode::InvalidHyperparameter, "seed must be a non-negative integer");
    }
    h.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("entries")) {
    if (!j["entries"].is_object()) {
      throw AuditError(ErrorCode::InvalidHyperparameter, "entries must be an object");
    }
    for (const auto& [name, value] : j["entries"].items()) {
      auto scalar = scalar_from_json(value);
      if (!scalar) {
        throw AuditError(ErrorCode::InvalidHyperparameter, "entry '" + name + "' is not a scalar");
      }
      h.entries[name] = *scalar;
    }
  }
  validate(h);
  return h;
}

namespace detail {

inline std::string hex(const unsigned char* bytes, std::size_t n) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[bytes[i] >> 4]);
    out.push_back(digits[bytes[i] & 0xF]);
  }
  return out;
}

}  // namespace detail

/// Lower-case hex SHA-256 of `bytes`.
inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw AuditError(ErrorCode::Io, "SHA-256 computation failed");
  }
  return detail::hex(digest, length);
}

/// Canonical byte form: model kind, seed, then entries in name order, each as
/// "name"=type:value with reals in shortest round-trip decimal form.
inline std::string canonical_serialisation(const Hyperparameters& h) {
  std::string out = "model_kind=" + std::string(to_string(h.model_kind)) + "\n";
  out += "seed=" + std::to_string(h.seed) + "\n";
  for (const auto& [name, value] : h.entries) {
    out += nlohmann::json(name).dump() + "=";
    std::visit(
        [&out](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, std::int64_t>) {
            out += "int:" + std::to_string(x);
          } else if constexpr (std::is_same_v<T, double>) {
            out += "real:" + shortest_repr(x);
          } else if constexpr (std::is_same_v<T, bool>) {
            out += x ? "bool:true" : "bool:false";
          } else {
            out += "str:" + nlohmann::json(x).dump();
          }
        },
        value);
    out += "\n";
  }
  return out;
}

inline std::string hyperparameter_digest(const Hyperparameters& h) {
  return sha256_hex(canonical_serialisation(h));
}

}  // namespace sdcaudit
