#include "ptcert/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>

#include <omp.h>

#include "ptcert/rng.hpp"

namespace ptcert {
namespace {

void check_plan(const PointCloud& cloud, std::size_t k) {
  if (k == 0) throw std::invalid_argument("subsample size must be at least 1");
  if (k > cloud.size()) throw std::invalid_argument("subsample larger than cloud");
}

}  // namespace

void subsample_indices(std::size_t n, std::size_t k, std::uint64_t seed,
                       std::vector<std::size_t>& scratch, std::vector<std::size_t>& out) {
  scratch.resize(n);
  std::iota(scratch.begin(), scratch.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(scratch[i], scratch[j]);
  }
  out.assign(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
}

PointCloud subsample(const PointCloud& cloud, std::size_t k, std::uint64_t seed) {
  check_plan(cloud, k);
  std::vector<std::size_t> scratch;
  std::vector<std::size_t> chosen;
  subsample_indices(cloud.size(), k, seed, scratch, chosen);
  return cloud.select(chosen);
}

std::vector<PointCloud> subsample_batch(const PointCloud& cloud, const SubsamplePlan& plan,
                                        int workers) {
  check_plan(cloud, plan.k);
  if (plan.count == 0) throw std::invalid_argument("subsample count must be at least 1");
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  const auto count = static_cast<std::ptrdiff_t>(plan.count);

  // Every slot is written by exactly one iteration, so the result does not
  // depend on the schedule.
  std::vector<std::optional<PointCloud>> slots(plan.count);
#pragma omp parallel num_threads(threads)
  {
    std::vector<std::size_t> scratch;
    std::vector<std::size_t> chosen;
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < count; ++j) {
      subsample_indices(cloud.size(), plan.k,
                        stream_seed(plan.master_seed, static_cast<std::uint64_t>(j)), scratch,
                        chosen);
      slots[static_cast<std::size_t>(j)] = cloud.select(chosen);
    }
  }
  std::vector<PointCloud> out;
  out.reserve(plan.count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<PointCloud> subsample_batch_serial(const PointCloud& cloud, const SubsamplePlan& plan) {
  check_plan(cloud, plan.k);
  if (plan.count == 0) throw std::invalid_argument("subsample count must be at least 1");
  std::vector<PointCloud> out;
  out.reserve(plan.count);
  for (std::size_t j = 0; j < plan.count; ++j) {
    out.push_back(subsample(cloud, plan.k, stream_seed(plan.master_seed, j)));
  }
  return out;
}

}  // namespace ptcert
