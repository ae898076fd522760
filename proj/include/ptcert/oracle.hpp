#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ptcert/certify.hpp"
#include "ptcert/classifier.hpp"
#include "ptcert/point_cloud.hpp"

namespace ptcert {

/// Enumeration guard: instances with more k-subsets than this are rejected.
inline constexpr std::uint64_t kOracleSubsetLimit = 1'000'000;

/// C(n, k) in 64 bits, or nullopt if it exceeds `limit`.
std::optional<std::uint64_t> bounded_binomial(std::uint64_t n, std::uint64_t k,
                                              std::uint64_t limit = kOracleSubsetLimit);

/// Lexicographic k-combinations of {0..n-1}, streamed.
class Combinations {
 public:
  Combinations(std::size_t n, std::size_t k);
  /// Positions the cursor on the combination with lexicographic rank `rank`.
  void seek(std::uint64_t rank);
  const std::vector<std::size_t>& current() const noexcept { return indices_; }
  /// Advances to the next combination; false once past the last one.
  bool next() noexcept;

 private:
  std::size_t n_;
  std::size_t k_;
  std::vector<std::size_t> indices_;
};

/// p_i = Pr(f(S_k(T)) = i) for every label, exactly.
struct ExactLabelDistribution {
  std::vector<ExactRational> probs;
};

/// Classifies all C(n,k) subsets. Throws std::invalid_argument("instance too
/// large for oracle") beyond kOracleSubsetLimit subsets.
ExactLabelDistribution exact_label_probs(const Classifier& model, const PointCloud& cloud,
                                         std::size_t k, int workers = 0);
ExactLabelDistribution exact_label_probs_serial(const Classifier& model, const PointCloud& cloud,
                                                std::size_t k);

/// Argmax of the distribution, ties to the smaller label.
Label argmax_label(const ExactLabelDistribution& dist);
Label exact_predict(const Classifier& model, const PointCloud& cloud, std::size_t k);

/// Exact top label, its probability, and the largest competing probability.
struct ExactBounds {
  Label top = 0;
  ExactRational p_y;
  ExactRational p_e;
};
ExactBounds exact_bounds(const ExactLabelDistribution& dist);

/// Masses of the subsample-space regions for |T| = n, |T*| = t, |T ∩ T*| = s.
struct RegionProbabilities {
  ExactRational w_in_shared;     ///< Pr(W in Δ_E)
  ExactRational w_in_original;   ///< Pr(W in Δ_T)
  ExactRational w_in_perturbed;  ///< Pr(W in Δ_T*)
  ExactRational z_in_shared;     ///< Pr(Z in Δ_E)
  ExactRational z_in_perturbed;  ///< Pr(Z in Δ_T*)
  ExactRational z_in_original;   ///< Pr(Z in Δ_T)

  friend bool operator==(const RegionProbabilities&, const RegionProbabilities&) = default;
};

/// Closed form. Requires s <= min(n, t), 1 <= k <= n, k <= t.
RegionProbabilities region_probs(std::uint64_t n, std::uint64_t t, std::uint64_t s, std::uint64_t k);

/// Brute force: enumerates the k-subsets of both clouds and classifies each
/// into the region it belongs to.
RegionProbabilities enumerate_region_probs(const PointCloud& original, const PointCloud& perturbed,
                                           std::size_t k);

/// A perturbed cloud T* with perturbation_size(T, T*) = r exactly, shaped by
/// the attack model. New points lie outside T's bounding box, so they are
/// never members of T. Modification and Deletion require r < n.
PointCloud random_attack(const PointCloud& cloud, std::uint64_t r, AttackModel attack,
                         std::uint64_t seed);

/// Number of random attacks at sizes 1..r_star (trials each) whose exact
/// prediction differs from exact_predict(T). An attacked cloud with fewer
/// than k points counts as a change.
std::uint64_t falsify(const Classifier& model, const PointCloud& cloud, std::size_t k,
                      AttackModel attack, std::uint64_t r_star, std::uint64_t trials,
                      std::uint64_t seed, int workers = 0);

/// Certified size by scanning r = 0, 1, ... until the condition first fails.
/// Shares no search logic with certified_size.
std::optional<std::uint64_t> certified_size_linear_scan(std::uint64_t n, std::uint64_t k,
                                                        const ExactRational& p_y,
                                                        const ExactRational& p_e,
                                                        AttackModel attack);

/// Sizes |T*| admitted by the attack model at perturbation size r.
std::vector<std::uint64_t> attacked_sizes(std::uint64_t n, std::uint64_t r, AttackModel attack);

/// Checks both directions of tightness for one parameter point: at r* no
/// admissible t has mass_e >= mass_y, and at r* + 1 (when the attack model
/// admits it) some t does. A t < k at r* + 1 counts as a witness, since such
/// a T* cannot be subsampled at all. Requires p_y > p_e and p_y + p_e <= 1.
bool tightness_holds(std::uint64_t n, std::uint64_t k, const ExactRational& p_y,
                     const ExactRational& p_e, AttackModel attack, std::string* why = nullptr);

/// Deterministic set of grid pairs (a, b), a > b, a, b in [0, C(n,k)]: all of
/// them when there are at most `cap`, otherwise `cap` pairs including the
/// extremes. Each pair is returned as (a / C, b / C).
std::vector<std::pair<ExactRational, ExactRational>> probability_grid_pairs(std::uint64_t n,
                                                                            std::uint64_t k,
                                                                            std::size_t cap);

// ---------------------------------------------------------------------------

/// Closed-form 3-d classifiers used for falsification: majority x-sign
/// (2 classes), positive-share bucket (3 classes), any-positive-x (2 classes).
std::vector<FunctionClassifier> closed_form_classifiers();

struct OracleSuiteOptions {
  std::size_t max_n = 10;
  std::size_t max_k = 3;
  std::uint64_t seed = 0;
  std::uint64_t trials = 200;
  std::size_t grid_cap = 200;
};

struct OracleSuiteReport {
  std::uint64_t search_cases = 0;
  std::uint64_t search_mismatches = 0;
  std::uint64_t witness_cases = 0;
  std::uint64_t witness_failures = 0;
  std::uint64_t region_cases = 0;
  std::uint64_t region_mismatches = 0;
  std::uint64_t falsify_instances = 0;
  std::uint64_t falsify_attacks = 0;
  std::uint64_t falsify_violations = 0;
  std::vector<std::string> failures;  ///< first few failure descriptions

  bool ok() const noexcept {
    return search_mismatches == 0 && witness_failures == 0 && region_mismatches == 0 &&
           falsify_violations == 0;
  }
};

/// Binary-vs-linear search, tightness witness, region probabilities, and
/// soundness falsification over every oracle-sized instance up to the limits.
OracleSuiteReport run_oracle_suite(const OracleSuiteOptions& options);

}  // namespace ptcert
