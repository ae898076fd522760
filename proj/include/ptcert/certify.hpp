#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "ptcert/classifier.hpp"
#include "ptcert/estimate.hpp"
#include "ptcert/point_cloud.hpp"

namespace ptcert {

/// Arbitrary-precision rational, always in canonical (reduced) form.
using ExactRational = mpq_class;

enum class AttackModel : std::uint8_t { kPerturbation, kModification, kAddition, kDeletion };

inline constexpr AttackModel kAllAttacks[] = {AttackModel::kPerturbation, AttackModel::kModification,
                                              AttackModel::kAddition, AttackModel::kDeletion};

std::string_view attack_name(AttackModel attack) noexcept;
/// Accepts "perturbation", "modification", "addition", "deletion".
AttackModel attack_from_name(std::string_view name);

/// C(n, k) as an exact integer; 0 when k > n.
mpz_class binomial(std::uint64_t n, std::uint64_t k);

/// C(t, k) / C(n, k). Requires n >= k >= 1.
ExactRational binom_ratio(std::uint64_t t, std::uint64_t k, std::uint64_t n);

/// Exact value of a finite double (every finite double is a dyadic rational).
ExactRational exact_from_double(double value);

struct RoundedBounds {
  ExactRational p_y;  ///< ceil(p_y_lower * C(n,k)) / C(n,k)
  ExactRational p_e;  ///< floor(p_e_upper * C(n,k)) / C(n,k)
};

/// Snaps the bounds onto the 1/C(n,k) grid that every label probability of
/// an n-point cloud lives on. Inputs are converted exactly, so the ceil and
/// floor carry no rounding error.
RoundedBounds round_bounds(double p_y_lower, double p_e_upper, std::uint64_t n, std::uint64_t k);
RoundedBounds round_bounds(const ExactRational& p_y_lower, const ExactRational& p_e_upper,
                           std::uint64_t n, std::uint64_t k);

/// C(t,k)/C(n,k) - 2 C(max(n,t) - r, k)/C(n,k) + 1 - p_y + p_e for one size t
/// of the perturbed cloud. Throws unless n - r <= t <= n + r.
ExactRational condition_lhs(std::uint64_t n, std::uint64_t k, std::uint64_t r, std::uint64_t t,
                            const ExactRational& p_y, const ExactRational& p_e);

/// Whether perturbation size r is certified under the attack model. Strict
/// inequality throughout; equality to zero does not certify.
///   Perturbation: max over t in [n-r, n+r] of condition_lhs < 0
///   Modification: 1 - C(n-r,k)/C(n,k) - (p_y - p_e)/2 < 0
///   Addition:     C(n+r,k)/C(n,k) - 1 - p_y + p_e < 0
///   Deletion:     -C(n-r,k)/C(n,k) + 1 - p_y + p_e < 0   (requires r < n)
bool condition_holds(std::uint64_t n, std::uint64_t k, std::uint64_t r, const ExactRational& p_y,
                     const ExactRational& p_e, AttackModel attack);

/// Largest r for which condition_holds, found by binary search. The search
/// interval is [0, n-1] for Modification and Deletion, [0, n] for
/// Perturbation, and is grown by doubling for Addition. Returns nullopt when
/// p_y <= p_e (the caller abstains).
std::optional<std::uint64_t> certified_size(std::uint64_t n, std::uint64_t k,
                                            const ExactRational& p_y, const ExactRational& p_e,
                                            AttackModel attack);

struct CertificationParams {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t num_samples = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

struct CertificationResult {
  std::optional<Label> label;           ///< nullopt = ABSTAIN
  std::optional<std::uint64_t> r_star;  ///< nullopt = ABSTAIN
  ProbabilityBounds bounds;
  AttackModel attack = AttackModel::kPerturbation;
  CertificationParams params;
};

struct CertificationReport {
  VoteCounts votes;
  ProbabilityBounds bounds;
  std::vector<CertificationResult> results;  ///< one per requested attack, in order
};

/// Subsample, vote, bound, and certify one cloud. Deterministic in its inputs
/// and independent of `workers`.
CertificationReport predict_and_certify(const Classifier& model, const PointCloud& cloud,
                                        std::size_t k, std::size_t num_samples, double alpha,
                                        std::uint64_t seed, std::span<const AttackModel> attacks,
                                        int workers = 0);

/// Certification from already-computed votes (no sampling).
CertificationReport certify_votes(const VoteCounts& votes, const CertificationParams& params,
                                  std::span<const AttackModel> attacks);

struct WitnessMasses {
  ExactRational mass_y;  ///< Pr(f*(Z) = y) for the worst-case classifier f*
  ExactRational mass_e;  ///< Pr(f*(Z) = e)
};

/// Label masses on the perturbed cloud of the worst-case classifier that
/// realises the bounds exactly. With s = max(n,t) - r and
/// eps = C(t,k)/C(n,k):
///   mass_y = max(0, (p_y - (1 - C(s,k)/C(n,k))) / eps)
///   mass_e = p_e / eps + 1 - C(s,k)/C(t,k)
/// Requires p_y + p_e <= 1, k <= n, n - r <= t <= n + r, and t >= k.
WitnessMasses tightness_witness(std::uint64_t n, std::uint64_t k, std::uint64_t r, std::uint64_t t,
                                const ExactRational& p_y, const ExactRational& p_e);

}  // namespace ptcert
