#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ptcert {

using Label = std::size_t;

/// Total order on points: coordinate-wise lexicographic, each coordinate
/// compared by the IEEE-754 totalOrder predicate. Two points compare equal
/// iff every coordinate is bit-identical.
int compare_points(std::span<const double> a, std::span<const double> b) noexcept;

/// Owning d-dimensional point used when building clouds.
struct Point {
  std::vector<double> coords;
};

/// An immutable set of d-dimensional points.
///
/// Points are stored flat, deduplicated, and sorted by compare_points. That
/// canonical order is what makes every downstream computation (subsampling,
/// descriptors, enumeration) depend only on the point set and not on the
/// order in which points were supplied.
class PointCloud {
 public:
  /// Builds a cloud from `coords` (size a multiple of `dim`). Duplicates are
  /// dropped; their number is written to `duplicates` when non-null.
  /// Throws std::invalid_argument on empty input or non-finite coordinates.
  static PointCloud from_flat(std::size_t dim, std::vector<double> coords,
                              std::size_t* duplicates = nullptr);
  static PointCloud from_points(std::span<const Point> points,
                                std::size_t* duplicates = nullptr);

  /// Trusted constructor: `coords` must already be sorted and duplicate
  /// free. Used by subset producers that select from a canonical cloud.
  static PointCloud from_sorted_unique(std::size_t dim, std::vector<double> coords);

  std::size_t size() const noexcept { return coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> point(std::size_t i) const noexcept {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<const double> coords() const noexcept { return coords_; }

  bool contains(std::span<const double> p) const noexcept;

  /// Cloud made of the points at the given (ascending, distinct) indices.
  PointCloud select(std::span<const std::size_t> sorted_indices) const;

  /// Set equality: same dimension and bit-identical points.
  friend bool operator==(const PointCloud& a, const PointCloud& b) noexcept;

 private:
  PointCloud(std::size_t dim, std::vector<double> coords)
      : dim_(dim), coords_(std::move(coords)) {}

  std::size_t dim_;
  std::vector<double> coords_;
};

/// |a ∩ b| under exact point equality.
std::size_t intersection_size(const PointCloud& a, const PointCloud& b);

/// max(|a|, |b|) - |a ∩ b|: the minimum number of modified, added and
/// deleted points turning one cloud into the other.
std::size_t perturbation_size(const PointCloud& a, const PointCloud& b);

// ---------------------------------------------------------------------------
// XYZ text format

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct ParsedCloud {
  PointCloud cloud;
  std::size_t duplicates = 0;
};

/// One point per nonblank line, `dim` whitespace separated decimals per
/// point; lines starting with '#' are comments.
ParsedCloud parse_xyz(std::string_view text, std::size_t dim);
ParsedCloud read_xyz(const std::filesystem::path& path, std::size_t dim);

/// Shortest round-trip decimal representation, one point per line.
std::string serialize_xyz(const PointCloud& cloud);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

// ---------------------------------------------------------------------------
// Synthetic shapes

enum class Shape : std::uint8_t {
  kSphere,
  kCubeSurface,
  kPlane,
  kLine,
  kTorus,
  kTwoClusters,
  kHelix,
  kCross,
};

inline constexpr std::size_t kNumShapes = 8;

std::string_view shape_name(Shape shape) noexcept;
/// Throws std::invalid_argument for unknown names.
Shape shape_from_name(std::string_view name);
Shape shape_from_index(std::size_t index);

/// Exactly n distinct 3-d points on the given shape, deterministic in
/// (shape, n, seed). Requires n >= 8.
PointCloud generate_synthetic(Shape shape, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Labeled datasets

struct LabeledCloud {
  std::string id;
  PointCloud cloud;
  Label label;
};

struct LabeledDataset {
  std::vector<LabeledCloud> entries;
  std::size_t num_classes = 0;

  /// Throws std::invalid_argument unless c >= 2 and every label < c.
  void validate() const;
};

/// Reads a labels file: one "relative/path,label" line per cloud, paths
/// relative to the labels file's directory.
LabeledDataset load_labeled_dataset(const std::filesystem::path& labels_file,
                                    std::size_t dim, std::size_t num_classes);

/// `clouds_per_class` clouds of each of the 8 shapes, label = shape index.
LabeledDataset generate_synthetic_dataset(std::size_t clouds_per_class, std::size_t n,
                                          std::uint64_t seed);

}  // namespace ptcert
