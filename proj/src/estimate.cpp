#include "ptcert/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <omp.h>

namespace ptcert {

VoteCounts count_votes_serial(const Classifier& model, std::span<const PointCloud> subsamples) {
  if (subsamples.empty()) throw std::invalid_argument("no subsamples to classify");
  VoteCounts votes;
  votes.counts.assign(model.num_classes(), 0);
  for (std::size_t j = 0; j < subsamples.size(); ++j) {
    try {
      ++votes.counts[model.classify(subsamples[j])];
    } catch (const std::exception& e) {
      throw std::runtime_error("subsample " + std::to_string(j) + ": " + e.what());
    }
  }
  votes.total = subsamples.size();
  return votes;
}

VoteCounts count_votes(const Classifier& model, std::span<const PointCloud> subsamples,
                       int workers) {
  if (subsamples.empty()) throw std::invalid_argument("no subsamples to classify");
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  const std::size_t c = model.num_classes();
  const auto count = static_cast<std::ptrdiff_t>(subsamples.size());

  std::vector<std::uint64_t> totals(c, 0);
  std::ptrdiff_t failed_at = count;
  std::string failure;
#pragma omp parallel num_threads(threads)
  {
    std::vector<std::uint64_t> local(c, 0);
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < count; ++j) {
      try {
        ++local[model.classify(subsamples[static_cast<std::size_t>(j)])];
      } catch (const std::exception& e) {
#pragma omp critical(ptcert_vote_error)
        if (j < failed_at) {
          failed_at = j;
          failure = e.what();
        }
      }
    }
#pragma omp critical(ptcert_vote_reduce)
    for (std::size_t i = 0; i < c; ++i) totals[i] += local[i];
  }
  if (failed_at < count) {
    throw std::runtime_error("subsample " + std::to_string(failed_at) + ": " + failure);
  }
  return VoteCounts{std::move(totals), subsamples.size()};
}

// ---------------------------------------------------------------------------

namespace {

// Stirling-series remainder: lgamma(z) - [(z - 1/2) log z - z + log(2 pi)/2].
double stirling_remainder(double z) {
  const double z2 = z * z;
  return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z;
}

// log( x^a (1-x)^b / B(a, b) ).
double log_beta_prefactor(double x, double a, double b) {
  if (std::min(a, b) < 10.0) {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
           b * std::log1p(-x);
  }
  // For large shapes the lgamma difference cancels badly; expand around the
  // mode instead: a log(x / x0) + b log((1-x) / (1-x0)) with x0 = a / (a+b).
  const double s = a + b;
  const double x0 = a / s;
  const double t1 = a * std::log1p((x - x0) / x0);
  const double t2 = b * std::log1p((x0 - x) / (1.0 - x0));
  return t1 + t2 + 0.5 * std::log(a * b / s) - 0.5 * std::log(2.0 * std::numbers::pi) -
         stirling_remainder(a) - stirling_remainder(b) + stirling_remainder(s);
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta shape parameters must be positive");
  if (std::isnan(x)) throw std::invalid_argument("x is NaN");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_beta_prefactor(x, a, b)) * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - std::exp(log_beta_prefactor(1.0 - x, b, a)) * beta_continued_fraction(1.0 - x, b, a) / b;
}

double beta_inv_cdf(double tau, double mu, double nu) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  if (!(mu > 0.0) || !(nu > 0.0)) throw std::invalid_argument("beta shape parameters must be positive");
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 2000; ++iter) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (regularized_incomplete_beta(mid, mu, nu) < tau) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo + 0.5 * (hi - lo);
}

double clopper_pearson_lower(std::uint64_t successes, std::uint64_t trials, double tail) {
  if (trials == 0 || successes > trials) throw std::invalid_argument("invalid binomial counts");
  if (successes == 0) return 0.0;
  const auto n = static_cast<double>(trials);
  if (successes == trials) return std::pow(tail, 1.0 / n);
  const auto x = static_cast<double>(successes);
  return beta_inv_cdf(tail, x, n - x + 1.0);
}

double clopper_pearson_upper(std::uint64_t successes, std::uint64_t trials, double tail) {
  if (trials == 0 || successes > trials) throw std::invalid_argument("invalid binomial counts");
  if (successes == trials) return 1.0;
  const auto n = static_cast<double>(trials);
  if (successes == 0) return 1.0 - std::pow(tail, 1.0 / n);
  const auto x = static_cast<double>(successes);
  return beta_inv_cdf(1.0 - tail, x + 1.0, n - x);
}

ProbabilityBounds prob_bounds(const VoteCounts& votes, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  const std::size_t c = votes.counts.size();
  if (c < 2) throw std::invalid_argument("need at least 2 labels");
  if (votes.total == 0) throw std::invalid_argument("no votes");
  std::uint64_t sum = 0;
  for (auto v : votes.counts) sum += v;
  if (sum != votes.total) throw std::invalid_argument("vote counts do not sum to the total");

  ProbabilityBounds out;
  out.alpha = alpha;
  out.num_classes = c;
  out.top = 0;
  for (Label i = 1; i < c; ++i) {
    if (votes.counts[i] > votes.counts[out.top]) out.top = i;
  }
  out.runner_up = out.top == 0 ? 1 : 0;
  for (Label i = 0; i < c; ++i) {
    if (i != out.top && votes.counts[i] > votes.counts[out.runner_up]) out.runner_up = i;
  }

  const double tail = alpha / static_cast<double>(c);
  out.p_y_lower = clopper_pearson_lower(votes.counts[out.top], votes.total, tail);
  double max_upper = 0.0;
  for (Label i = 0; i < c; ++i) {
    if (i == out.top) continue;
    max_upper = std::max(max_upper, clopper_pearson_upper(votes.counts[i], votes.total, tail));
  }
  out.p_e_upper = std::min(max_upper, 1.0 - out.p_y_lower);
  return out;
}

}  // namespace ptcert
