#include "ptcert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ptcert/sampling.hpp"

namespace ptcert {

std::string_view attack_name(AttackModel attack) noexcept {
  switch (attack) {
    case AttackModel::kPerturbation:
      return "perturbation";
    case AttackModel::kModification:
      return "modification";
    case AttackModel::kAddition:
      return "addition";
    case AttackModel::kDeletion:
      return "deletion";
  }
  return "unknown";
}

AttackModel attack_from_name(std::string_view name) {
  for (AttackModel a : kAllAttacks) {
    if (attack_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown attack model '" + std::string(name) + "'");
}

mpz_class binomial(std::uint64_t n, std::uint64_t k) {
  mpz_class out;
  if (k > n) return out;
  mpz_bin_uiui(out.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(k));
  return out;
}

ExactRational binom_ratio(std::uint64_t t, std::uint64_t k, std::uint64_t n) {
  if (k == 0) throw std::invalid_argument("subsample size must be at least 1");
  if (k > n) throw std::invalid_argument("subsample larger than cloud");
  ExactRational out(binomial(t, k), binomial(n, k));
  out.canonicalize();
  return out;
}

ExactRational exact_from_double(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("non-finite probability");
  ExactRational out;
  mpq_set_d(out.get_mpq_t(), value);  // exact for finite doubles
  return out;
}

RoundedBounds round_bounds(const ExactRational& p_y_lower, const ExactRational& p_e_upper,
                           std::uint64_t n, std::uint64_t k) {
  if (k == 0 || k > n) throw std::invalid_argument("round_bounds requires 1 <= k <= n");
  if (p_y_lower < 0 || p_y_lower > 1 || p_e_upper < 0 || p_e_upper > 1) {
    throw std::invalid_argument("probability bounds must lie in [0, 1]");
  }
  const mpz_class grid = binomial(n, k);
  const ExactRational scaled_y = p_y_lower * grid;
  const ExactRational scaled_e = p_e_upper * grid;
  mpz_class up;
  mpz_class down;
  mpz_cdiv_q(up.get_mpz_t(), scaled_y.get_num_mpz_t(), scaled_y.get_den_mpz_t());
  mpz_fdiv_q(down.get_mpz_t(), scaled_e.get_num_mpz_t(), scaled_e.get_den_mpz_t());
  RoundedBounds out{ExactRational(up, grid), ExactRational(down, grid)};
  out.p_y.canonicalize();
  out.p_e.canonicalize();
  return out;
}

RoundedBounds round_bounds(double p_y_lower, double p_e_upper, std::uint64_t n, std::uint64_t k) {
  return round_bounds(exact_from_double(p_y_lower), exact_from_double(p_e_upper), n, k);
}

namespace {

bool t_in_range(std::uint64_t n, std::uint64_t r, std::uint64_t t) {
  return t + r >= n && t <= n + r;
}

// Evaluates the summand with C(n,k) already computed.
ExactRational lhs_with_grid(const mpz_class& grid, std::uint64_t n, std::uint64_t k,
                            std::uint64_t r, std::uint64_t t, const ExactRational& slack) {
  const std::uint64_t top = std::max(n, t);
  const std::uint64_t s = top >= r ? top - r : 0;
  ExactRational out(binomial(t, k) - 2 * binomial(s, k), grid);
  out.canonicalize();
  out += slack;
  return out;
}

void check_condition_args(std::uint64_t n, std::uint64_t k) {
  if (k == 0) throw std::invalid_argument("subsample size must be at least 1");
  if (k > n) throw std::invalid_argument("subsample larger than cloud");
}

}  // namespace

ExactRational condition_lhs(std::uint64_t n, std::uint64_t k, std::uint64_t r, std::uint64_t t,
                            const ExactRational& p_y, const ExactRational& p_e) {
  check_condition_args(n, k);
  if (!t_in_range(n, r, t)) {
    throw std::invalid_argument("t = " + std::to_string(t) + " outside [n - r, n + r]");
  }
  const ExactRational slack = 1 - p_y + p_e;
  return lhs_with_grid(binomial(n, k), n, k, r, t, slack);
}

bool condition_holds(std::uint64_t n, std::uint64_t k, std::uint64_t r, const ExactRational& p_y,
                     const ExactRational& p_e, AttackModel attack) {
  check_condition_args(n, k);
  const mpz_class grid = binomial(n, k);
  switch (attack) {
    case AttackModel::kModification: {
      if (r > n) throw std::invalid_argument("cannot modify more points than the cloud has");
      ExactRational value(grid - binomial(n - r, k), grid);
      value.canonicalize();
      value -= (p_y - p_e) / 2;
      return value < 0;
    }
    case AttackModel::kAddition: {
      ExactRational value(binomial(n + r, k), grid);
      value.canonicalize();
      value += -1 - p_y + p_e;
      return value < 0;
    }
    case AttackModel::kDeletion: {
      if (r >= n) throw std::invalid_argument("deletion requires r < n");
      ExactRational value(-binomial(n - r, k), grid);
      value.canonicalize();
      value += 1 - p_y + p_e;
      return value < 0;
    }
    case AttackModel::kPerturbation: {
      const ExactRational slack = 1 - p_y + p_e;
      const std::uint64_t t_lo = n > r ? n - r : 0;
      for (std::uint64_t t = t_lo; t <= n + r; ++t) {
        if (lhs_with_grid(grid, n, k, r, t, slack) >= 0) return false;
      }
      return true;
    }
  }
  throw std::invalid_argument("unknown attack model");
}

std::optional<std::uint64_t> certified_size(std::uint64_t n, std::uint64_t k,
                                            const ExactRational& p_y, const ExactRational& p_e,
                                            AttackModel attack) {
  check_condition_args(n, k);
  if (p_y <= p_e) return std::nullopt;
  auto holds = [&](std::uint64_t r) { return condition_holds(n, k, r, p_y, p_e, attack); };

  // Invariant: holds(lo) and (hi is outside the domain or !holds(hi)).
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  switch (attack) {
    case AttackModel::kModification:
    case AttackModel::kDeletion:
      if (n == 1) return 0;
      if (holds(n - 1)) return n - 1;
      hi = n - 1;
      break;
    case AttackModel::kPerturbation:
      if (holds(n)) return n;
      hi = n;
      break;
    case AttackModel::kAddition:
      hi = 1;
      while (holds(hi)) {
        lo = hi;
        hi *= 2;
      }
      break;
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (holds(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

CertificationReport certify_votes(const VoteCounts& votes, const CertificationParams& params,
                                  std::span<const AttackModel> attacks) {
  CertificationReport report;
  report.votes = votes;
  report.bounds = prob_bounds(votes, params.alpha);
  const bool abstain = !(report.bounds.p_y_lower > report.bounds.p_e_upper);
  std::optional<RoundedBounds> rounded;
  if (!abstain) rounded = round_bounds(report.bounds.p_y_lower, report.bounds.p_e_upper, params.n, params.k);
  for (AttackModel attack : attacks) {
    CertificationResult result;
    result.bounds = report.bounds;
    result.attack = attack;
    result.params = params;
    if (rounded) {
      result.r_star = certified_size(params.n, params.k, rounded->p_y, rounded->p_e, attack);
      if (result.r_star) result.label = report.bounds.top;
    }
    report.results.push_back(std::move(result));
  }
  return report;
}

CertificationReport predict_and_certify(const Classifier& model, const PointCloud& cloud,
                                        std::size_t k, std::size_t num_samples, double alpha,
                                        std::uint64_t seed, std::span<const AttackModel> attacks,
                                        int workers) {
  if (num_samples == 0) throw std::invalid_argument("need at least one subsample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  const SubsamplePlan plan{k, num_samples, seed};
  const auto subsamples = workers == 1 ? subsample_batch_serial(cloud, plan)
                                       : subsample_batch(cloud, plan, workers);
  const auto votes = workers == 1 ? count_votes_serial(model, subsamples)
                                  : count_votes(model, subsamples, workers);
  return certify_votes(votes, CertificationParams{cloud.size(), k, num_samples, alpha, seed},
                       attacks);
}

WitnessMasses tightness_witness(std::uint64_t n, std::uint64_t k, std::uint64_t r, std::uint64_t t,
                                const ExactRational& p_y, const ExactRational& p_e) {
  check_condition_args(n, k);
  if (p_y + p_e > 1) throw std::invalid_argument("witness requires p_y + p_e <= 1");
  if (p_y < 0 || p_e < 0) throw std::invalid_argument("negative probability bound");
  if (!t_in_range(n, r, t)) {
    throw std::invalid_argument("t = " + std::to_string(t) + " outside [n - r, n + r]");
  }
  if (t < k) throw std::invalid_argument("perturbed cloud smaller than the subsample size");
  const std::uint64_t top = std::max(n, t);
  if (top < r) throw std::invalid_argument("perturbation size exceeds max(n, t)");
  const std::uint64_t s = top - r;

  const mpz_class grid = binomial(n, k);
  const mpz_class ct = binomial(t, k);
  const mpz_class cs = binomial(s, k);
  ExactRational eps(ct, grid);
  eps.canonicalize();
  ExactRational kept(cs, grid);  // Pr(W in Delta_E)
  kept.canonicalize();
  ExactRational shared(cs, ct);  // Pr(Z in Delta_E)
  shared.canonicalize();

  WitnessMasses out;
  out.mass_y = (p_y - (1 - kept)) / eps;
  if (out.mass_y < 0) out.mass_y = 0;
  out.mass_e = p_e / eps + 1 - shared;
  return out;
}

}  // namespace ptcert
