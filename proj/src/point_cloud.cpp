#include "ptcert/point_cloud.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "ptcert/rng.hpp"

namespace ptcert {
namespace {

// Maps a double to an unsigned key whose natural order is IEEE totalOrder.
constexpr std::uint64_t order_key(double x) noexcept {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  return (bits >> 63) ? ~bits : (bits | 0x8000000000000000ULL);
}

void check_finite(std::span<const double> coords) {
  for (double v : coords) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite coordinate");
  }
}

}  // namespace

int compare_points(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t d = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < d; ++i) {
    const auto ka = order_key(a[i]);
    const auto kb = order_key(b[i]);
    if (ka != kb) return ka < kb ? -1 : 1;
  }
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  return 0;
}

PointCloud PointCloud::from_flat(std::size_t dim, std::vector<double> coords,
                                 std::size_t* duplicates) {
  if (dim == 0) throw std::invalid_argument("dimension must be at least 1");
  if (coords.size() % dim != 0) {
    throw std::invalid_argument("coordinate count is not a multiple of the dimension");
  }
  if (coords.empty()) throw std::invalid_argument("empty cloud");
  check_finite(coords);

  const std::size_t n = coords.size() / dim;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto pt = [&](std::size_t i) { return std::span<const double>(coords.data() + i * dim, dim); };
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return compare_points(pt(a), pt(b)) < 0; });

  std::vector<double> sorted;
  sorted.reserve(coords.size());
  std::size_t dropped = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0 && compare_points(pt(order[j - 1]), pt(order[j])) == 0) {
      ++dropped;
      continue;
    }
    const auto p = pt(order[j]);
    sorted.insert(sorted.end(), p.begin(), p.end());
  }
  if (duplicates != nullptr) *duplicates = dropped;
  return PointCloud(dim, std::move(sorted));
}

PointCloud PointCloud::from_points(std::span<const Point> points, std::size_t* duplicates) {
  if (points.empty()) throw std::invalid_argument("empty cloud");
  const std::size_t dim = points.front().coords.size();
  std::vector<double> flat;
  flat.reserve(points.size() * dim);
  for (const auto& p : points) {
    if (p.coords.size() != dim) throw std::invalid_argument("incompatible dimensions");
    flat.insert(flat.end(), p.coords.begin(), p.coords.end());
  }
  return from_flat(dim, std::move(flat), duplicates);
}

PointCloud PointCloud::from_sorted_unique(std::size_t dim, std::vector<double> coords) {
  if (dim == 0 || coords.empty() || coords.size() % dim != 0) {
    throw std::invalid_argument("empty cloud");
  }
  return PointCloud(dim, std::move(coords));
}

bool PointCloud::contains(std::span<const double> p) const noexcept {
  if (p.size() != dim_) return false;
  std::size_t lo = 0;
  std::size_t hi = size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const int c = compare_points(point(mid), p);
    if (c == 0) return true;
    if (c < 0) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return false;
}

PointCloud PointCloud::select(std::span<const std::size_t> sorted_indices) const {
  std::vector<double> out;
  out.reserve(sorted_indices.size() * dim_);
  for (std::size_t i : sorted_indices) {
    const auto p = point(i);
    out.insert(out.end(), p.begin(), p.end());
  }
  return from_sorted_unique(dim_, std::move(out));
}

bool operator==(const PointCloud& a, const PointCloud& b) noexcept {
  if (a.dim_ != b.dim_ || a.coords_.size() != b.coords_.size()) return false;
  for (std::size_t i = 0; i < a.coords_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.coords_[i]) != std::bit_cast<std::uint64_t>(b.coords_[i])) {
      return false;
    }
  }
  return true;
}

std::size_t intersection_size(const PointCloud& a, const PointCloud& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("incompatible dimensions");
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t common = 0;
  while (i < a.size() && j < b.size()) {
    const int c = compare_points(a.point(i), b.point(j));
    if (c == 0) {
      ++common;
      ++i;
      ++j;
    } else if (c < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  return common;
}

std::size_t perturbation_size(const PointCloud& a, const PointCloud& b) {
  return std::max(a.size(), b.size()) - intersection_size(a, b);
}

// ---------------------------------------------------------------------------

ParsedCloud parse_xyz(std::string_view text, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("dimension must be at least 1");
  std::vector<double> coords;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    line.remove_prefix(first);
    if (line.front() == '#') continue;

    std::size_t fields = 0;
    std::size_t cursor = 0;
    while (true) {
      cursor = line.find_first_not_of(" \t\r", cursor);
      if (cursor == std::string_view::npos) break;
      std::size_t stop = line.find_first_of(" \t\r", cursor);
      if (stop == std::string_view::npos) stop = line.size();
      const std::string_view token = line.substr(cursor, stop - cursor);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw ParseError(line_no, "malformed number '" + std::string(token) + "'");
      }
      if (!std::isfinite(value)) throw ParseError(line_no, "non-finite coordinate");
      if (++fields > dim) break;
      coords.push_back(value);
      cursor = stop;
    }
    if (fields != dim) {
      throw ParseError(line_no, "expected " + std::to_string(dim) + " coordinates, found " +
                                    (fields > dim ? "more" : std::to_string(fields)));
    }
    if (end == text.size()) break;
  }
  if (coords.empty()) throw ParseError(line_no, "empty cloud");
  std::size_t dups = 0;
  auto cloud = PointCloud::from_flat(dim, std::move(coords), &dups);
  return ParsedCloud{std::move(cloud), dups};
}

ParsedCloud read_xyz(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_xyz(buf.str(), dim);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

std::string serialize_xyz(const PointCloud& cloud) {
  std::string out;
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (j > 0) out.push_back(' ');
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), p[j]);
      out.append(buf.data(), res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_xyz(cloud);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, kNumShapes> kShapeNames = {
    "sphere", "cube-surface", "plane", "line", "torus", "two-clusters", "helix", "cross"};

std::array<double, 3> shape_point(Shape shape, SplitMix64& rng) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double u = rng.uniform();
  const double v = rng.uniform();
  const double w = rng.uniform();
  switch (shape) {
    case Shape::kSphere: {
      const double z = 2.0 * u - 1.0;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double theta = kTwoPi * v;
      return {rho * std::cos(theta), rho * std::sin(theta), z};
    }
    case Shape::kCubeSurface: {
      const auto face = static_cast<int>(w * 6.0);
      const double a = 2.0 * u - 1.0;
      const double b = 2.0 * v - 1.0;
      const double side = (face % 2 == 0) ? 1.0 : -1.0;
      switch (face / 2) {
        case 0:
          return {side, a, b};
        case 1:
          return {a, side, b};
        default:
          return {a, b, side};
      }
    }
    case Shape::kPlane:
      return {2.0 * u - 1.0, 2.0 * v - 1.0, 0.0};
    case Shape::kLine:
      return {2.0 * u - 1.0, 0.0, 0.0};
    case Shape::kTorus: {
      constexpr double kMajor = 1.0;
      constexpr double kMinor = 0.3;
      const double theta = kTwoPi * u;
      const double phi = kTwoPi * v;
      const double ring = kMajor + kMinor * std::cos(phi);
      return {ring * std::cos(theta), ring * std::sin(theta), kMinor * std::sin(phi)};
    }
    case Shape::kTwoClusters: {
      const double centre = (w < 0.5) ? -0.6 : 0.6;
      return {centre + 0.4 * (u - 0.5), 0.4 * (v - 0.5), 0.4 * (rng.uniform() - 0.5)};
    }
    case Shape::kHelix: {
      constexpr double kTurns = 3.0;
      const double angle = kTwoPi * kTurns * u;
      return {0.5 * std::cos(angle), 0.5 * std::sin(angle), 2.0 * u - 1.0};
    }
    case Shape::kCross:
      if (w < 0.5) return {2.0 * u - 1.0, 0.0, 0.0};
      return {0.0, 2.0 * u - 1.0, 0.0};
  }
  throw std::invalid_argument("unknown shape");
}

}  // namespace

std::string_view shape_name(Shape shape) noexcept {
  return kShapeNames[static_cast<std::size_t>(shape)];
}

Shape shape_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kShapeNames.size(); ++i) {
    if (kShapeNames[i] == name) return static_cast<Shape>(i);
  }
  throw std::invalid_argument("unknown shape '" + std::string(name) + "'");
}

Shape shape_from_index(std::size_t index) {
  if (index >= kNumShapes) throw std::invalid_argument("unknown shape id " + std::to_string(index));
  return static_cast<Shape>(index);
}

PointCloud generate_synthetic(Shape shape, std::size_t n, std::uint64_t seed) {
  if (static_cast<std::size_t>(shape) >= kNumShapes) throw std::invalid_argument("unknown shape");
  if (n < 8) throw std::invalid_argument("synthetic clouds need at least 8 points");

  SplitMix64 rng(stream_seed(seed, static_cast<std::uint64_t>(shape)));
  auto less = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return compare_points(a, b) < 0;
  };
  std::set<std::array<double, 3>, decltype(less)> points(less);
  while (points.size() < n) points.insert(shape_point(shape, rng));

  std::vector<double> flat;
  flat.reserve(3 * n);
  for (const auto& p : points) flat.insert(flat.end(), p.begin(), p.end());
  return PointCloud::from_sorted_unique(3, std::move(flat));
}

// ---------------------------------------------------------------------------

void LabeledDataset::validate() const {
  if (num_classes < 2) throw std::invalid_argument("a dataset needs at least 2 classes");
  for (const auto& e : entries) {
    if (e.label >= num_classes) {
      throw std::invalid_argument("cloud '" + e.id + "' has label " + std::to_string(e.label) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

LabeledDataset load_labeled_dataset(const std::filesystem::path& labels_file, std::size_t dim,
                                    std::size_t num_classes) {
  std::ifstream in(labels_file);
  if (!in) throw std::runtime_error("cannot open " + labels_file.string());
  const auto base = labels_file.parent_path();

  LabeledDataset ds;
  ds.num_classes = num_classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ParseError(line_no, "expected 'path,label'");
    const std::string rel = line.substr(0, comma);
    const std::string label_text = line.substr(comma + 1);
    std::size_t label = 0;
    const auto [ptr, ec] =
        std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc{} || ptr != label_text.data() + label_text.size()) {
      throw ParseError(line_no, "malformed label '" + label_text + "'");
    }
    auto parsed = read_xyz(base / rel, dim);
    ds.entries.push_back({rel, std::move(parsed.cloud), label});
  }
  ds.validate();
  return ds;
}

LabeledDataset generate_synthetic_dataset(std::size_t clouds_per_class, std::size_t n,
                                          std::uint64_t seed) {
  LabeledDataset ds;
  ds.num_classes = kNumShapes;
  for (std::size_t s = 0; s < kNumShapes; ++s) {
    for (std::size_t i = 0; i < clouds_per_class; ++i) {
      const Shape shape = shape_from_index(s);
      const std::uint64_t cloud_seed = stream_seed(seed, s * clouds_per_class + i);
      std::string id = std::string(shape_name(shape)) + "_" + std::to_string(i);
      ds.entries.push_back({std::move(id), generate_synthetic(shape, n, cloud_seed), s});
    }
  }
  return ds;
}

}  // namespace ptcert
