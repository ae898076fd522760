// Command-line front end: certify one cloud, evaluate a dataset, run the
// oracle suite, train a centroid model, convert smoothing radii.

#include <charconv>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptcert/certify.hpp"
#include "ptcert/classifier.hpp"
#include "ptcert/harness.hpp"
#include "ptcert/oracle.hpp"
#include "ptcert/point_cloud.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitViolation = 2;

using nlohmann::json;
using namespace ptcert;

std::vector<AttackModel> parse_attacks(const std::vector<std::string>& names) {
  std::vector<AttackModel> out;
  for (const auto& name : names) {
    if (name == "all") return {std::begin(kAllAttacks), std::end(kAllAttacks)};
    out.push_back(attack_from_name(name));
  }
  if (out.empty()) throw std::invalid_argument("no attack model given");
  return out;
}

double parse_lambda(const std::string& text) {
  if (text == "modelnet40") return kModelNet40Lambda;
  if (text == "scannet") return kScanNetLambda;
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw std::invalid_argument("lambda must be a number, 'modelnet40' or 'scannet'");
  }
  return value;
}

json report_to_json(const CertificationReport& report, const CertificationParams& params) {
  json results = json::array();
  for (const auto& res : report.results) {
    results.push_back({
        {"attack", attack_name(res.attack)},
        {"label", res.label ? json(*res.label) : json("ABSTAIN")},
        {"r_star", res.r_star ? json(*res.r_star) : json("ABSTAIN")},
    });
  }
  return {
      {"n", params.n},
      {"k", params.k},
      {"N", params.num_samples},
      {"alpha", params.alpha},
      {"seed", params.seed},
      {"votes", report.votes.counts},
      {"top", report.bounds.top},
      {"runner_up", report.bounds.runner_up},
      {"p_y_lower", report.bounds.p_y_lower},
      {"p_e_upper", report.bounds.p_e_upper},
      {"results", std::move(results)},
  };
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified robustness of subsampling point-cloud classifiers"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "worker threads (0 = all available)")->check(CLI::NonNegativeNumber);

  // certify
  auto* certify = app.add_subcommand("certify", "predict and certify one point cloud");
  std::string input, model_path, classifier_kind = "nearest_centroid";
  std::size_t k = 16, num_samples = 10000, dim = 3;
  double alpha = 0.001;
  std::uint64_t seed = 0;
  std::vector<std::string> attack_names{"all"};
  certify->add_option("--input", input, "XYZ point cloud")->required();
  certify->add_option("--model", model_path, "centroid model JSON");
  certify->add_option("--classifier", classifier_kind, "nearest_centroid | majority_x_sign")
      ->check(CLI::IsMember({"nearest_centroid", "majority_x_sign"}));
  certify->add_option("--k", k, "subsample size")->check(CLI::PositiveNumber);
  certify->add_option("--num-samples", num_samples, "Monte-Carlo subsamples")->check(CLI::PositiveNumber);
  certify->add_option("--alpha", alpha, "total error budget")->check(CLI::Range(0.0, 1.0));
  certify->add_option("--seed", seed, "master seed");
  certify->add_option("--attack", attack_names, "attack model(s) or 'all'");
  certify->add_option("--dim", dim, "point dimension")->check(CLI::PositiveNumber);

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "certify a whole dataset");
  std::string config_path, out_dir;
  evaluate_cmd->add_option("--config", config_path, "config JSON")->required();
  evaluate_cmd->add_option("--out-dir", out_dir, "output directory")->required();

  // oracle-check
  auto* oracle_cmd = app.add_subcommand("oracle-check", "run the exhaustive oracle suite");
  OracleSuiteOptions oracle_opts;
  oracle_cmd->add_option("--max-n", oracle_opts.max_n)->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--max-k", oracle_opts.max_k)->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--seed", oracle_opts.seed);
  oracle_cmd->add_option("--trials", oracle_opts.trials, "random attacks per (instance, attack, r)");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit a nearest-centroid model");
  std::string train_config, train_out;
  train_cmd->add_option("--config", train_config, "config JSON")->required();
  train_cmd->add_option("--out", train_out, "model JSON to write")->required();

  // rs-convert
  auto* rs_cmd = app.add_subcommand("rs-convert", "l2 radius to certified point count");
  double delta = 0.0;
  std::string lambda_text;
  rs_cmd->add_option("--delta", delta, "l2 radius")->required();
  rs_cmd->add_option("--lambda", lambda_text, "diameter bound, or modelnet40 / scannet")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*certify) {
      std::unique_ptr<Classifier> model;
      if (classifier_kind == "majority_x_sign") {
        model = std::make_unique<MajorityXSignClassifier>(dim);
      } else {
        if (model_path.empty()) throw std::invalid_argument("--model is required for nearest_centroid");
        model = std::make_unique<NearestCentroidClassifier>(load_model(model_path));
      }
      const auto parsed = read_xyz(input, dim);
      if (parsed.duplicates > 0) {
        std::cerr << "note: dropped " << parsed.duplicates << " duplicate point(s)\n";
      }
      const auto attacks = parse_attacks(attack_names);
      const auto report = predict_and_certify(*model, parsed.cloud, k, num_samples, alpha, seed,
                                              attacks, workers);
      CertificationParams params{parsed.cloud.size(), k, num_samples, alpha, seed};
      std::cout << report_to_json(report, params).dump(2) << '\n';
    } else if (*evaluate_cmd) {
      const auto config = load_config(config_path);
      const auto out = run_evaluation(config, out_dir, workers);
      std::cout << "wrote " << out.records.size() << " record(s) and " << out.curves.size()
                << " curve(s) to " << out_dir << '\n';
    } else if (*oracle_cmd) {
      const auto report = run_oracle_suite(oracle_opts);
      std::cout << "search equivalence: " << report.search_cases << " cases, "
                << report.search_mismatches << " mismatches\n"
                << "tightness witness:  " << report.witness_cases << " cases, "
                << report.witness_failures << " failures\n"
                << "region masses:      " << report.region_cases << " cases, "
                << report.region_mismatches << " mismatches\n"
                << "falsification:      " << report.falsify_instances << " instances, "
                << report.falsify_attacks << " attacks, " << report.falsify_violations
                << " violations\n";
      for (const auto& f : report.failures) std::cout << "  " << f << '\n';
      std::cout << (report.ok() ? "OK" : "VIOLATION") << '\n';
      return report.ok() ? kExitOk : kExitViolation;
    } else if (*train_cmd) {
      const json doc = read_json(train_config);
      const std::filesystem::path base = std::filesystem::path(train_config).parent_path();
      json spec;
      if (doc.contains("train")) {
        spec = doc["train"];
      } else if (doc.contains("classifier") && doc["classifier"].contains("train")) {
        spec = doc["classifier"]["train"];
      } else {
        throw std::invalid_argument("config has no 'train' section");
      }
      save_model(train_out, train_from_spec(spec, base));
      std::cout << "wrote " << train_out << '\n';
    } else if (*rs_cmd) {
      std::cout << rs_size_from_radius(delta, parse_lambda(lambda_text)) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}
