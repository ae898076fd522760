#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ptcert/classifier.hpp"
#include "ptcert/point_cloud.hpp"

namespace ptcert {

struct VoteCounts {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
};

/// Simultaneous bounds for the top label y and the runner-up e.
struct ProbabilityBounds {
  Label top = 0;
  Label runner_up = 1;
  double p_y_lower = 0.0;
  double p_e_upper = 1.0;
  double alpha = 0.0;
  std::size_t num_classes = 0;
};

/// counts[i] = #{j : f(subsamples[j]) = i}. A classifier error is rethrown
/// as std::runtime_error naming the subsample index (the smallest failing
/// index under the parallel schedule as well).
VoteCounts count_votes(const Classifier& model, std::span<const PointCloud> subsamples,
                       int workers = 0);
VoteCounts count_votes_serial(const Classifier& model, std::span<const PointCloud> subsamples);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double x, double a, double b);

/// Beta(tau; mu, nu): the tau-quantile of Beta(mu, nu), by bisection on
/// regularized_incomplete_beta. Throws std::invalid_argument unless
/// 0 < tau < 1, mu > 0, nu > 0.
double beta_inv_cdf(double tau, double mu, double nu);

/// Exact one-sided Clopper-Pearson bounds at level `tail` for `successes`
/// out of `trials`: lower = Beta(tail; x, N-x+1), upper = Beta(1-tail; x+1, N-x).
/// x = N (lower) and x = 0 (upper) use the closed forms tail^(1/N) and
/// 1 - tail^(1/N).
double clopper_pearson_lower(std::uint64_t successes, std::uint64_t trials, double tail);
double clopper_pearson_upper(std::uint64_t successes, std::uint64_t trials, double tail);

/// Top-two labels (ties to the smaller index) and simultaneous bounds with
/// error budget alpha split as alpha/c over all c labels:
///   p_y_lower = clopper_pearson_lower(N_y, N, alpha/c)
///   p_e_upper = min(max_{i != y} clopper_pearson_upper(N_i, N, alpha/c), 1 - p_y_lower)
/// Requires at least 2 labels.
ProbabilityBounds prob_bounds(const VoteCounts& votes, double alpha);

}  // namespace ptcert
