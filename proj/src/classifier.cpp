#include "ptcert/classifier.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "ptcert/rng.hpp"
#include "ptcert/sampling.hpp"

namespace ptcert {

Label Classifier::classify(const PointCloud& cloud) const {
  if (cloud.dim() != dimension()) {
    throw std::invalid_argument("incompatible dimensions: classifier expects " +
                                std::to_string(dimension()) + ", cloud has " +
                                std::to_string(cloud.dim()));
  }
  const Label label = classify_unchecked(cloud);
  if (label >= num_classes()) {
    throw std::logic_error("classifier returned label " + std::to_string(label) +
                           " outside [0, " + std::to_string(num_classes()) + ")");
  }
  return label;
}

ConstantClassifier::ConstantClassifier(Label label, std::size_t num_classes, std::size_t dim)
    : label_(label), num_classes_(num_classes), dim_(dim) {
  if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (label >= num_classes) throw std::invalid_argument("constant label out of range");
}

Label MajorityXSignClassifier::classify_unchecked(const PointCloud& cloud) const {
  std::size_t positive = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.point(i)[0] > 0.0) ++positive;
  }
  return positive >= cloud.size() - positive ? 1 : 0;
}

std::vector<double> descriptor(const PointCloud& cloud) {
  const std::size_t d = cloud.dim();
  const std::size_t n = cloud.size();
  std::vector<double> out(descriptor_length(d), 0.0);
  double* mean = out.data();
  double* var = out.data() + d;
  double& pairwise = out[2 * d];
  double* extent = out.data() + 2 * d + 1;
  double& norm = out[3 * d + 1];

  std::vector<double> lo(cloud.point(0).begin(), cloud.point(0).end());
  std::vector<double> hi = lo;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = cloud.point(i);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] += p[j];
      lo[j] = std::min(lo[j], p[j]);
      hi[j] = std::max(hi[j], p[j]);
      sq += p[j] * p[j];
    }
    norm += std::sqrt(sq);
  }
  const auto nd = static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    mean[j] /= nd;
    extent[j] = hi[j] - lo[j];
  }
  norm /= nd;

  for (std::size_t i = 0; i < n; ++i) {
    const auto p = cloud.point(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = p[j] - mean[j];
      var[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j) var[j] /= nd;

  if (n > 1) {
    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const auto pa = cloud.point(a);
      for (std::size_t b = a + 1; b < n; ++b) {
        const auto pb = cloud.point(b);
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = pa[j] - pb[j];
          sq += diff * diff;
        }
        total += std::sqrt(sq);
      }
    }
    pairwise = total / (nd * (nd - 1.0) / 2.0);
  }
  return out;
}

void CentroidModel::validate() const {
  if (num_classes < 2) throw std::invalid_argument("model needs at least 2 classes");
  if (descriptor_length < 5 || (descriptor_length - 2) % 3 != 0) {
    throw std::invalid_argument("invalid descriptor length " + std::to_string(descriptor_length));
  }
  if (centroids.size() != num_classes) {
    throw std::invalid_argument("model has " + std::to_string(centroids.size()) +
                                " centroids for " + std::to_string(num_classes) + " classes");
  }
  bool any = false;
  for (const auto& c : centroids) {
    if (!c) continue;
    any = true;
    if (c->size() != descriptor_length) throw std::invalid_argument("centroid length mismatch");
  }
  if (!any) throw std::invalid_argument("model has no trained centroid");
}

nlohmann::json to_json(const CentroidModel& model) {
  nlohmann::json centroids = nlohmann::json::array();
  for (const auto& c : model.centroids) {
    centroids.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
  }
  return {{"num_classes", model.num_classes},
          {"descriptor_length", model.descriptor_length},
          {"centroids", std::move(centroids)}};
}

CentroidModel centroid_model_from_json(const nlohmann::json& doc) {
  CentroidModel model;
  try {
    model.num_classes = doc.at("num_classes").get<std::size_t>();
    model.descriptor_length = doc.at("descriptor_length").get<std::size_t>();
    for (const auto& c : doc.at("centroids")) {
      if (c.is_null()) {
        model.centroids.emplace_back(std::nullopt);
      } else {
        model.centroids.emplace_back(c.get<std::vector<double>>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed model document: ") + e.what());
  }
  model.validate();
  return model;
}

void save_model(const std::filesystem::path& path, const CentroidModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(model).dump(2) << '\n';
}

CentroidModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return centroid_model_from_json(doc);
}

NearestCentroidClassifier::NearestCentroidClassifier(CentroidModel model)
    : model_(std::move(model)) {
  model_.validate();
  dim_ = (model_.descriptor_length - 2) / 3;
}

Label NearestCentroidClassifier::classify_unchecked(const PointCloud& cloud) const {
  const auto desc = descriptor(cloud);
  Label best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  bool found = false;
  for (Label c = 0; c < model_.num_classes; ++c) {
    const auto& centroid = model_.centroids[c];
    if (!centroid) continue;
    double dist = 0.0;
    for (std::size_t j = 0; j < desc.size(); ++j) {
      const double diff = desc[j] - (*centroid)[j];
      dist += diff * diff;
    }
    if (!found || dist < best_dist) {
      best = c;
      best_dist = dist;
      found = true;
    }
  }
  return best;
}

CentroidModel fit_with_subsampling(const LabeledDataset& training, std::size_t k,
                                   std::size_t epochs, std::uint64_t seed) {
  training.validate();
  if (epochs == 0) throw std::invalid_argument("no training passes");
  if (k == 0) throw std::invalid_argument("subsample size must be at least 1");
  if (training.entries.empty()) throw std::invalid_argument("empty training set");

  const std::size_t dim = training.entries.front().cloud.dim();
  for (const auto& e : training.entries) {
    if (e.cloud.dim() != dim) throw std::invalid_argument("incompatible dimensions in '" + e.id + "'");
    if (e.cloud.size() < k) {
      throw std::invalid_argument("training cloud '" + e.id + "' has " +
                                  std::to_string(e.cloud.size()) + " points, fewer than k = " +
                                  std::to_string(k));
    }
  }

  const std::size_t len = descriptor_length(dim);
  std::vector<std::vector<double>> sums(training.num_classes, std::vector<double>(len, 0.0));
  std::vector<std::size_t> counts(training.num_classes, 0);
  const std::size_t m = training.entries.size();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto& e = training.entries[i];
      const auto sub = subsample(e.cloud, k, stream_seed(seed, epoch * m + i));
      const auto desc = descriptor(sub);
      auto& sum = sums[e.label];
      for (std::size_t j = 0; j < len; ++j) sum[j] += desc[j];
      ++counts[e.label];
    }
  }

  CentroidModel model;
  model.num_classes = training.num_classes;
  model.descriptor_length = len;
  for (std::size_t c = 0; c < training.num_classes; ++c) {
    if (counts[c] == 0) {
      model.centroids.emplace_back(std::nullopt);
      continue;
    }
    auto centroid = std::move(sums[c]);
    for (double& v : centroid) v /= static_cast<double>(counts[c]);
    model.centroids.emplace_back(std::move(centroid));
  }
  return model;
}

}  // namespace ptcert
