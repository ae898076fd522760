#include "ptcert/harness.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <stdexcept>

#include <omp.h>

#include "ptcert/rng.hpp"

namespace ptcert {

nlohmann::json to_json(const EvaluationRecord& record) {
  nlohmann::json r_star = nlohmann::json::object();
  for (const auto& [attack, size] : record.r_star) {
    r_star[std::string(attack_name(attack))] =
        size ? nlohmann::json(*size) : nlohmann::json("ABSTAIN");
  }
  nlohmann::json doc;
  doc["id"] = record.id;
  doc["label"] = record.true_label;
  doc["predicted"] = record.predicted ? nlohmann::json(*record.predicted) : nlohmann::json("ABSTAIN");
  doc["r_star"] = std::move(r_star);
  doc["p_y_lower"] = record.p_y_lower;
  doc["p_e_upper"] = record.p_e_upper;
  doc["k"] = record.k;
  doc["N"] = record.num_samples;
  doc["alpha"] = record.alpha;
  doc["seed"] = record.seed;
  return doc;
}

double certified_accuracy(const std::vector<EvaluationRecord>& records, AttackModel attack,
                          std::uint64_t r) {
  if (records.empty()) throw std::invalid_argument("no evaluation records");
  std::size_t hits = 0;
  for (const auto& rec : records) {
    if (!rec.predicted || *rec.predicted != rec.true_label) continue;
    const auto it = rec.r_star.find(attack);
    if (it == rec.r_star.end() || !it->second) continue;
    if (*it->second >= r) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

AccuracyCurve accuracy_curve(const std::vector<EvaluationRecord>& records, AttackModel attack,
                             std::uint64_t r_max) {
  AccuracyCurve curve;
  curve.attack = attack;
  for (std::uint64_t r = 0; r <= r_max; ++r) {
    curve.points.emplace_back(r, certified_accuracy(records, attack, r));
  }
  return curve;
}

std::string curve_csv(const AccuracyCurve& curve) {
  std::string out = "r,certified_accuracy\n";
  std::array<char, 32> buf{};
  for (const auto& [r, ca] : curve.points) {
    out += std::to_string(r);
    out.push_back(',');
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), ca);
    out.append(buf.data(), res.ptr);
    out.push_back('\n');
  }
  return out;
}

std::uint64_t rs_size_from_radius(double delta, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be nonnegative");
  const ExactRational d = exact_from_double(delta);
  const ExactRational l = exact_from_double(lambda);
  const ExactRational ratio = (d * d) / (l * l);
  mpz_class floor_value;
  mpz_fdiv_q(floor_value.get_mpz_t(), ratio.get_num_mpz_t(), ratio.get_den_mpz_t());
  if (!floor_value.fits_ulong_p()) throw std::invalid_argument("size does not fit in 64 bits");
  return floor_value.get_ui();
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
T field(const nlohmann::json& doc, const char* name) {
  if (!doc.contains(name)) throw std::invalid_argument(std::string("config: missing '") + name + "'");
  try {
    return doc.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: bad '") + name + "': " + e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& doc, const char* name, T fallback) {
  return doc.contains(name) ? field<T>(doc, name) : fallback;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

EvaluationConfig parse_config(const nlohmann::json& doc, std::filesystem::path base_dir) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  EvaluationConfig cfg;
  cfg.base_dir = std::move(base_dir);
  if (!doc.contains("dataset") || !doc["dataset"].is_object()) {
    throw std::invalid_argument("config: missing 'dataset' object");
  }
  if (!doc.contains("classifier") || !doc["classifier"].is_object()) {
    throw std::invalid_argument("config: missing 'classifier' object");
  }
  cfg.dataset = doc["dataset"];
  cfg.classifier = doc["classifier"];
  cfg.k = field<std::size_t>(doc, "k");
  cfg.num_samples = field<std::size_t>(doc, "N");
  cfg.alpha = field<double>(doc, "alpha");
  cfg.seed = field_or<std::uint64_t>(doc, "seed", 0);
  cfg.r_max_report = field_or<std::uint64_t>(doc, "r_max_report", cfg.r_max_report);
  if (doc.contains("attacks")) {
    const auto& attacks = doc["attacks"];
    if (attacks.is_string() && attacks.get<std::string>() == "all") {
      // default already lists every model
    } else if (attacks.is_array() && !attacks.empty()) {
      cfg.attacks.clear();
      for (const auto& a : attacks) cfg.attacks.push_back(attack_from_name(a.get<std::string>()));
    } else {
      throw std::invalid_argument("config: 'attacks' must be \"all\" or a nonempty list");
    }
  }
  if (cfg.k == 0) throw std::invalid_argument("config: k must be at least 1");
  if (cfg.num_samples == 0) throw std::invalid_argument("config: N must be at least 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("config: alpha must lie in (0, 1)");
  return cfg;
}

EvaluationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

LabeledDataset load_dataset(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
  LabeledDataset ds;
  if (spec.contains("synthetic")) {
    const auto& syn = spec["synthetic"];
    ds = generate_synthetic_dataset(field<std::size_t>(syn, "clouds_per_class"),
                                    field<std::size_t>(syn, "n"),
                                    field_or<std::uint64_t>(syn, "seed", 0));
  } else if (spec.contains("path")) {
    ds = load_labeled_dataset(resolve(base_dir, field<std::string>(spec, "path")),
                              field_or<std::size_t>(spec, "dim", 3),
                              field<std::size_t>(spec, "num_classes"));
  } else {
    throw std::invalid_argument("dataset spec needs 'synthetic' or 'path'");
  }
  if (ds.entries.empty()) throw std::invalid_argument("dataset is empty");
  ds.validate();
  return ds;
}

CentroidModel train_from_spec(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
  if (!spec.contains("dataset")) throw std::invalid_argument("train spec needs 'dataset'");
  const auto training = load_dataset(spec["dataset"], base_dir);
  return fit_with_subsampling(training, field<std::size_t>(spec, "k"),
                              field<std::size_t>(spec, "epochs"),
                              field_or<std::uint64_t>(spec, "seed", 0));
}

std::unique_ptr<Classifier> build_classifier(const nlohmann::json& spec,
                                             const std::filesystem::path& base_dir) {
  const auto kind = field<std::string>(spec, "kind");
  if (kind == "nearest_centroid") {
    if (spec.contains("model_path")) {
      return std::make_unique<NearestCentroidClassifier>(
          load_model(resolve(base_dir, field<std::string>(spec, "model_path"))));
    }
    if (spec.contains("train")) {
      return std::make_unique<NearestCentroidClassifier>(train_from_spec(spec["train"], base_dir));
    }
    throw std::invalid_argument("nearest_centroid needs 'model_path' or 'train'");
  }
  if (kind == "majority_x_sign") {
    return std::make_unique<MajorityXSignClassifier>(field_or<std::size_t>(spec, "dim", 3));
  }
  if (kind == "constant") {
    return std::make_unique<ConstantClassifier>(field<std::size_t>(spec, "label"),
                                                field<std::size_t>(spec, "num_classes"),
                                                field_or<std::size_t>(spec, "dim", 3));
  }
  throw std::invalid_argument("unknown classifier kind '" + kind + "'");
}

EvaluationOutput evaluate(const EvaluationConfig& config, int workers) {
  const auto dataset = load_dataset(config.dataset, config.base_dir);
  const auto model = build_classifier(config.classifier, config.base_dir);
  for (const auto& e : dataset.entries) {
    if (e.cloud.dim() != model->dimension()) {
      throw std::invalid_argument("cloud '" + e.id + "' has dimension " +
                                  std::to_string(e.cloud.dim()) + ", classifier expects " +
                                  std::to_string(model->dimension()));
    }
    if (e.cloud.size() < config.k) {
      throw std::invalid_argument("cloud '" + e.id + "' has fewer than k points");
    }
  }

  const std::size_t m = dataset.entries.size();
  std::vector<EvaluationRecord> records(m);
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  std::string failure;
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(m); ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    const auto& entry = dataset.entries[i];
    try {
      const std::uint64_t seed = stream_seed(config.seed, i);
      const auto report = predict_and_certify(*model, entry.cloud, config.k, config.num_samples,
                                              config.alpha, seed, config.attacks, 1);
      EvaluationRecord& rec = records[i];
      rec.id = entry.id;
      rec.true_label = entry.label;
      rec.p_y_lower = report.bounds.p_y_lower;
      rec.p_e_upper = report.bounds.p_e_upper;
      rec.k = config.k;
      rec.num_samples = config.num_samples;
      rec.alpha = config.alpha;
      rec.seed = seed;
      for (const auto& res : report.results) {
        rec.r_star[res.attack] = res.r_star;
        if (res.label) rec.predicted = res.label;
      }
    } catch (const std::exception& e) {
#pragma omp critical(ptcert_eval_error)
      if (failure.empty()) failure = "cloud '" + entry.id + "': " + e.what();
    }
  }
  if (!failure.empty()) throw std::runtime_error(failure);

  EvaluationOutput out;
  out.records = std::move(records);
  for (AttackModel attack : config.attacks) {
    out.curves.push_back(accuracy_curve(out.records, attack, config.r_max_report));
  }
  return out;
}

EvaluationOutput run_evaluation(const EvaluationConfig& config, const std::filesystem::path& out_dir,
                                int workers) {
  auto out = evaluate(config, workers);

  std::string records;
  for (const auto& rec : out.records) {
    records += to_json(rec).dump();
    records.push_back('\n');
  }
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  files.emplace_back(out_dir / "records.jsonl", std::move(records));
  for (const auto& curve : out.curves) {
    files.emplace_back(out_dir / ("curve_" + std::string(attack_name(curve.attack)) + ".csv"),
                       curve_csv(curve));
  }

  std::filesystem::create_directories(out_dir);
  // Stage every file first, then move them into place.
  for (const auto& [path, content] : files) write_file(path.string() + ".tmp", content);
  for (const auto& [path, content] : files) {
    std::filesystem::rename(path.string() + ".tmp", path);
  }
  return out;
}

}  // namespace ptcert
