#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ptcert/point_cloud.hpp"

namespace ptcert {

struct SubsamplePlan {
  std::size_t k = 1;
  std::size_t count = 1;
  std::uint64_t master_seed = 0;
};

/// Uniform k-subset drawn without replacement. A partial Fisher-Yates
/// shuffle over the cloud's canonical order driven by SplitMix64(stream_seed),
/// so the subset depends only on the point set and the seed.
/// Throws std::invalid_argument("subsample larger than cloud") when k > n.
PointCloud subsample(const PointCloud& cloud, std::size_t k, std::uint64_t stream_seed);

/// Writes the k chosen canonical indices (ascending) into `out`, reusing
/// `scratch` as the shuffle buffer. The allocation-free core of subsample.
void subsample_indices(std::size_t n, std::size_t k, std::uint64_t stream_seed,
                       std::vector<std::size_t>& scratch, std::vector<std::size_t>& out);

/// plan.count subsamples; the j-th uses stream_seed(plan.master_seed, j).
/// `workers` <= 0 uses the OpenMP default.
std::vector<PointCloud> subsample_batch(const PointCloud& cloud, const SubsamplePlan& plan,
                                        int workers = 0);

/// Single-threaded reference for subsample_batch.
std::vector<PointCloud> subsample_batch_serial(const PointCloud& cloud, const SubsamplePlan& plan);

}  // namespace ptcert
