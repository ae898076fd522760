#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "ptcert/point_cloud.hpp"

namespace ptcert {

/// A deterministic point-cloud classifier f: PointCloud -> {0..c-1}.
///
/// Implementations see clouds in canonical order, so any function of the
/// stored points is automatically permutation-invariant. Implementations
/// must be safe to call concurrently.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t num_classes() const noexcept = 0;
  virtual std::size_t dimension() const noexcept = 0;

  /// Throws std::invalid_argument on a dimension mismatch and
  /// std::logic_error if the implementation returns an out-of-range label.
  Label classify(const PointCloud& cloud) const;

 protected:
  virtual Label classify_unchecked(const PointCloud& cloud) const = 0;
};

/// Always predicts the same label.
class ConstantClassifier final : public Classifier {
 public:
  ConstantClassifier(Label label, std::size_t num_classes, std::size_t dim = 3);
  std::size_t num_classes() const noexcept override { return num_classes_; }
  std::size_t dimension() const noexcept override { return dim_; }

 protected:
  Label classify_unchecked(const PointCloud&) const override { return label_; }

 private:
  Label label_;
  std::size_t num_classes_;
  std::size_t dim_;
};

/// Two classes: 1 iff #{x > 0} >= #{x <= 0}, else 0 (x = first coordinate).
class MajorityXSignClassifier final : public Classifier {
 public:
  explicit MajorityXSignClassifier(std::size_t dim = 3) : dim_(dim) {}
  std::size_t num_classes() const noexcept override { return 2; }
  std::size_t dimension() const noexcept override { return dim_; }

 protected:
  Label classify_unchecked(const PointCloud& cloud) const override;

 private:
  std::size_t dim_;
};

/// Wraps an arbitrary callable; handy for closed-form test classifiers.
class FunctionClassifier final : public Classifier {
 public:
  using Fn = std::function<Label(const PointCloud&)>;
  FunctionClassifier(std::size_t num_classes, std::size_t dim, Fn fn)
      : num_classes_(num_classes), dim_(dim), fn_(std::move(fn)) {}
  std::size_t num_classes() const noexcept override { return num_classes_; }
  std::size_t dimension() const noexcept override { return dim_; }

 protected:
  Label classify_unchecked(const PointCloud& cloud) const override { return fn_(cloud); }

 private:
  std::size_t num_classes_;
  std::size_t dim_;
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Nearest-centroid on shape descriptors

/// Descriptor layout for a d-dimensional cloud, 3d + 2 entries:
///   [0, d)       coordinate means
///   [d, 2d)      coordinate variances (population)
///   2d           mean pairwise Euclidean distance (0 for a single point)
///   [2d+1, 3d+1) bounding-box extents
///   3d+1         mean Euclidean norm of the points
std::vector<double> descriptor(const PointCloud& cloud);
constexpr std::size_t descriptor_length(std::size_t dim) noexcept { return 3 * dim + 2; }

struct CentroidModel {
  std::size_t num_classes = 0;
  std::size_t descriptor_length = 0;
  /// One centroid per class; nullopt for a class that had no training data
  /// and can therefore never be predicted.
  std::vector<std::optional<std::vector<double>>> centroids;

  /// Throws std::invalid_argument if the shape invariants are broken.
  void validate() const;
};

nlohmann::json to_json(const CentroidModel& model);
CentroidModel centroid_model_from_json(const nlohmann::json& doc);
void save_model(const std::filesystem::path& path, const CentroidModel& model);
CentroidModel load_model(const std::filesystem::path& path);

class NearestCentroidClassifier final : public Classifier {
 public:
  explicit NearestCentroidClassifier(CentroidModel model);
  std::size_t num_classes() const noexcept override { return model_.num_classes; }
  std::size_t dimension() const noexcept override { return dim_; }
  const CentroidModel& model() const noexcept { return model_; }

 protected:
  /// Squared Euclidean distance in descriptor space; ties go to the smaller label.
  Label classify_unchecked(const PointCloud& cloud) const override;

 private:
  CentroidModel model_;
  std::size_t dim_;
};

/// Trains centroids on subsampled clouds: for every epoch and every cloud
/// (in dataset order) one fresh k-subsample is drawn with seed
/// stream_seed(seed, epoch * m + i) and its descriptor added to the class
/// running sum. Centroids are the per-class means.
CentroidModel fit_with_subsampling(const LabeledDataset& training, std::size_t k,
                                   std::size_t epochs, std::uint64_t seed);

}  // namespace ptcert
