#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptcert/certify.hpp"
#include "ptcert/classifier.hpp"
#include "ptcert/point_cloud.hpp"

namespace ptcert {

struct EvaluationRecord {
  std::string id;
  Label true_label = 0;
  std::optional<Label> predicted;  ///< nullopt = ABSTAIN
  std::map<AttackModel, std::optional<std::uint64_t>> r_star;
  double p_y_lower = 0.0;
  double p_e_upper = 0.0;
  std::size_t k = 0;
  std::size_t num_samples = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const EvaluationRecord& record);

struct AccuracyCurve {
  AttackModel attack = AttackModel::kPerturbation;
  std::vector<std::pair<std::uint64_t, double>> points;  ///< (r, CA_r), r ascending
};

/// Fraction of records predicted correctly with r* >= r. Abstentions count
/// as incorrect at every r. Throws on an empty record list.
double certified_accuracy(const std::vector<EvaluationRecord>& records, AttackModel attack,
                          std::uint64_t r);

AccuracyCurve accuracy_curve(const std::vector<EvaluationRecord>& records, AttackModel attack,
                             std::uint64_t r_max);

/// "r,certified_accuracy" header followed by one row per point.
std::string curve_csv(const AccuracyCurve& curve);

/// Diameter bounds used to convert an l2 smoothing radius into a point count.
inline const double kModelNet40Lambda = 2.0 * std::sqrt(3.0);
inline const double kScanNetLambda = std::sqrt(15.0);

/// floor(delta^2 / lambda^2), evaluated exactly on the given doubles.
std::uint64_t rs_size_from_radius(double delta, double lambda);

// ---------------------------------------------------------------------------

struct EvaluationConfig {
  nlohmann::json dataset;
  nlohmann::json classifier;
  std::size_t k = 16;
  std::size_t num_samples = 10000;
  double alpha = 0.001;
  std::uint64_t seed = 0;
  std::vector<AttackModel> attacks{std::begin(kAllAttacks), std::end(kAllAttacks)};
  std::uint64_t r_max_report = 32;
  /// Directory that relative paths in the document are resolved against.
  std::filesystem::path base_dir;
};

/// Parses and validates a config document ({dataset, classifier, k, N,
/// alpha, seed, attacks, r_max_report}). Throws std::invalid_argument.
EvaluationConfig parse_config(const nlohmann::json& doc, std::filesystem::path base_dir = {});
EvaluationConfig load_config(const std::filesystem::path& path);

/// Dataset spec: {"synthetic": {"clouds_per_class", "n", "seed"}} or
/// {"path": labels file, "dim", "num_classes"}.
LabeledDataset load_dataset(const nlohmann::json& spec, const std::filesystem::path& base_dir);

/// Classifier spec: {"kind": "nearest_centroid", "model_path" | "train"},
/// {"kind": "majority_x_sign"}, or {"kind": "constant", "label", "num_classes"}.
std::unique_ptr<Classifier> build_classifier(const nlohmann::json& spec,
                                             const std::filesystem::path& base_dir);

/// Train spec: {"dataset": <dataset spec>, "k", "epochs", "seed"}.
CentroidModel train_from_spec(const nlohmann::json& spec, const std::filesystem::path& base_dir);

struct EvaluationOutput {
  std::vector<EvaluationRecord> records;
  std::vector<AccuracyCurve> curves;  ///< one per configured attack
};

/// Certifies every cloud of the dataset; cloud i uses seed
/// stream_seed(config.seed, i). Records keep dataset order. Output does not
/// depend on `workers`.
EvaluationOutput evaluate(const EvaluationConfig& config, int workers = 0);

/// evaluate() and then write records.jsonl and curve_<attack>.csv into
/// out_dir. Nothing is written unless the whole evaluation succeeds.
EvaluationOutput run_evaluation(const EvaluationConfig& config, const std::filesystem::path& out_dir,
                                int workers = 0);

}  // namespace ptcert
