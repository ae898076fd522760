#include "ptcert/oracle.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

#include <omp.h>

#include "ptcert/rng.hpp"
#include "ptcert/sampling.hpp"

namespace ptcert {

std::optional<std::uint64_t> bounded_binomial(std::uint64_t n, std::uint64_t k,
                                              std::uint64_t limit) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    acc = acc * (n - i) / (i + 1);
    if (acc > limit) return std::nullopt;
  }
  return static_cast<std::uint64_t>(acc);
}

Combinations::Combinations(std::size_t n, std::size_t k) : n_(n), k_(k), indices_(k) {
  if (k == 0 || k > n) throw std::invalid_argument("combinations require 1 <= k <= n");
  for (std::size_t i = 0; i < k; ++i) indices_[i] = i;
}

void Combinations::seek(std::uint64_t rank) {
  // Combinatorial number system, lexicographic order.
  std::size_t value = 0;
  for (std::size_t pos = 0; pos < k_; ++pos) {
    while (true) {
      const auto block = bounded_binomial(n_ - value - 1, k_ - pos - 1, ~std::uint64_t{0});
      if (rank < *block) break;
      rank -= *block;
      ++value;
    }
    indices_[pos] = value++;
  }
}

bool Combinations::next() noexcept {
  std::size_t i = k_;
  while (i > 0) {
    --i;
    if (indices_[i] < n_ - k_ + i) {
      ++indices_[i];
      for (std::size_t j = i + 1; j < k_; ++j) indices_[j] = indices_[j - 1] + 1;
      return true;
    }
  }
  return false;
}

namespace {

std::uint64_t guarded_subset_count(std::size_t n, std::size_t k) {
  if (k == 0) throw std::invalid_argument("subsample size must be at least 1");
  if (k > n) throw std::invalid_argument("subsample larger than cloud");
  const auto count = bounded_binomial(n, k);
  if (!count) throw std::invalid_argument("instance too large for oracle");
  return *count;
}

ExactLabelDistribution to_distribution(const std::vector<std::uint64_t>& counts,
                                       std::uint64_t total) {
  ExactLabelDistribution dist;
  for (auto c : counts) {
    ExactRational p(mpz_class(static_cast<unsigned long>(c)), mpz_class(static_cast<unsigned long>(total)));
    p.canonicalize();
    dist.probs.push_back(std::move(p));
  }
  return dist;
}

}  // namespace

ExactLabelDistribution exact_label_probs_serial(const Classifier& model, const PointCloud& cloud,
                                                std::size_t k) {
  const std::uint64_t total = guarded_subset_count(cloud.size(), k);
  std::vector<std::uint64_t> counts(model.num_classes(), 0);
  Combinations combo(cloud.size(), k);
  do {
    ++counts[model.classify(cloud.select(combo.current()))];
  } while (combo.next());
  return to_distribution(counts, total);
}

ExactLabelDistribution exact_label_probs(const Classifier& model, const PointCloud& cloud,
                                         std::size_t k, int workers) {
  const std::uint64_t total = guarded_subset_count(cloud.size(), k);
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  const std::size_t c = model.num_classes();
  std::vector<std::uint64_t> counts(c, 0);
  std::string failure;
#pragma omp parallel num_threads(threads)
  {
    // Each thread owns one contiguous slice of the rank space.
    const auto shards = static_cast<std::uint64_t>(omp_get_num_threads());
    const auto me = static_cast<std::uint64_t>(omp_get_thread_num());
    const std::uint64_t begin = total * me / shards;
    const std::uint64_t end = total * (me + 1) / shards;
    std::vector<std::uint64_t> local(c, 0);
    try {
      if (begin < end) {
        Combinations combo(cloud.size(), k);
        combo.seek(begin);
        for (std::uint64_t rank = begin; rank < end; ++rank) {
          ++local[model.classify(cloud.select(combo.current()))];
          combo.next();
        }
      }
    } catch (const std::exception& e) {
#pragma omp critical(ptcert_oracle_error)
      if (failure.empty()) failure = e.what();
    }
#pragma omp critical(ptcert_oracle_reduce)
    for (std::size_t i = 0; i < c; ++i) counts[i] += local[i];
  }
  if (!failure.empty()) throw std::runtime_error(failure);
  return to_distribution(counts, total);
}

Label argmax_label(const ExactLabelDistribution& dist) {
  if (dist.probs.empty()) throw std::invalid_argument("empty distribution");
  Label best = 0;
  for (Label i = 1; i < dist.probs.size(); ++i) {
    if (dist.probs[i] > dist.probs[best]) best = i;
  }
  return best;
}

Label exact_predict(const Classifier& model, const PointCloud& cloud, std::size_t k) {
  return argmax_label(exact_label_probs_serial(model, cloud, k));
}

ExactBounds exact_bounds(const ExactLabelDistribution& dist) {
  if (dist.probs.size() < 2) throw std::invalid_argument("need at least 2 labels");
  ExactBounds out;
  out.top = argmax_label(dist);
  out.p_y = dist.probs[out.top];
  out.p_e = 0;
  for (Label i = 0; i < dist.probs.size(); ++i) {
    if (i != out.top && dist.probs[i] > out.p_e) out.p_e = dist.probs[i];
  }
  return out;
}

RegionProbabilities region_probs(std::uint64_t n, std::uint64_t t, std::uint64_t s,
                                 std::uint64_t k) {
  if (s > std::min(n, t)) throw std::invalid_argument("shared points exceed a cloud size");
  if (k == 0 || k > n || k > t) throw std::invalid_argument("region_probs requires 1 <= k <= min(n, t)");
  RegionProbabilities out;
  out.w_in_shared = binom_ratio(s, k, n);
  out.w_in_original = 1 - out.w_in_shared;
  out.w_in_perturbed = 0;
  out.z_in_shared = binom_ratio(s, k, t);
  out.z_in_perturbed = 1 - out.z_in_shared;
  out.z_in_original = 0;
  return out;
}

RegionProbabilities enumerate_region_probs(const PointCloud& original, const PointCloud& perturbed,
                                           std::size_t k) {
  const std::uint64_t total_w = guarded_subset_count(original.size(), k);
  const std::uint64_t total_z = guarded_subset_count(perturbed.size(), k);

  // Every subset is tested against each region's definition directly:
  // Δ_E = subsets of T ∩ T*, Δ_T (Δ_T*) = subsets of T (T*) not in Δ_E.
  struct Tally {
    std::uint64_t shared = 0;
    std::uint64_t original = 0;
    std::uint64_t perturbed = 0;
  };
  auto tally = [k, &original, &perturbed](const PointCloud& source) {
    std::vector<bool> in_t(source.size());
    std::vector<bool> in_t_star(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
      in_t[i] = original.contains(source.point(i));
      in_t_star[i] = perturbed.contains(source.point(i));
    }
    Tally out;
    Combinations combo(source.size(), k);
    do {
      const auto& idx = combo.current();
      const bool within_t = std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return in_t[i]; });
      const bool within_t_star =
          std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return in_t_star[i]; });
      const bool shared = within_t && within_t_star;
      out.shared += shared;
      out.original += within_t && !shared;
      out.perturbed += within_t_star && !shared;
    } while (combo.next());
    return out;
  };

  const Tally w = tally(original);
  const Tally z = tally(perturbed);

  auto ratio = [](std::uint64_t a, std::uint64_t b) {
    ExactRational q(mpz_class(static_cast<unsigned long>(a)), mpz_class(static_cast<unsigned long>(b)));
    q.canonicalize();
    return q;
  };
  RegionProbabilities out;
  out.w_in_shared = ratio(w.shared, total_w);
  out.w_in_original = ratio(w.original, total_w);
  out.w_in_perturbed = ratio(w.perturbed, total_w);
  out.z_in_shared = ratio(z.shared, total_z);
  out.z_in_perturbed = ratio(z.perturbed, total_z);
  out.z_in_original = ratio(z.original, total_z);
  return out;
}

// ---------------------------------------------------------------------------

PointCloud random_attack(const PointCloud& cloud, std::uint64_t r, AttackModel attack,
                         std::uint64_t seed) {
  const std::uint64_t n = cloud.size();
  if (r == 0) return cloud;
  if ((attack == AttackModel::kModification || attack == AttackModel::kDeletion) && r >= n) {
    throw std::invalid_argument("modification and deletion attacks require r < n");
  }
  SplitMix64 rng(seed);

  std::uint64_t t = n;
  switch (attack) {
    case AttackModel::kModification:
      t = n;
      break;
    case AttackModel::kAddition:
      t = n + r;
      break;
    case AttackModel::kDeletion:
      t = n - r;
      break;
    case AttackModel::kPerturbation: {
      // Any t with |n - t| <= r, t >= 1 and max(n, t) >= r.
      const std::uint64_t t_lo = n >= r ? std::max<std::uint64_t>(n - r, 1) : r;
      t = t_lo + rng.below(n + r - t_lo + 1);
      break;
    }
  }
  const std::uint64_t s = std::max(n, t) - r;

  std::vector<std::size_t> scratch;
  std::vector<std::size_t> kept;
  if (s > 0) subsample_indices(n, s, rng.next(), scratch, kept);

  const std::size_t d = cloud.dim();
  std::vector<double> lo(cloud.point(0).begin(), cloud.point(0).end());
  std::vector<double> hi = lo;
  for (std::size_t i = 1; i < n; ++i) {
    const auto p = cloud.point(i);
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], p[j]);
      hi[j] = std::max(hi[j], p[j]);
    }
  }
  double span = 1.0;
  for (std::size_t j = 0; j < d; ++j) span = std::max(span, hi[j] - lo[j]);

  std::vector<double> coords;
  coords.reserve(t * d);
  for (std::size_t i : kept) {
    const auto p = cloud.point(i);
    coords.insert(coords.end(), p.begin(), p.end());
  }
  for (std::uint64_t fresh = 0; fresh < t - s; ++fresh) {
    std::vector<double> p(d);
    for (std::size_t j = 0; j < d; ++j) p[j] = lo[j] - span + rng.uniform() * (hi[j] - lo[j] + 2 * span);
    // One coordinate is pushed past the box into a slab owned by this point
    // alone, which keeps fresh points distinct from T and from each other.
    const std::size_t axis = rng.below(d);
    const double offset = span * (1.0 + static_cast<double>(fresh) + rng.uniform());
    p[axis] = (rng.next() & 1) ? hi[axis] + offset : lo[axis] - offset;
    coords.insert(coords.end(), p.begin(), p.end());
  }
  return PointCloud::from_flat(d, std::move(coords));
}

std::uint64_t falsify(const Classifier& model, const PointCloud& cloud, std::size_t k,
                      AttackModel attack, std::uint64_t r_star, std::uint64_t trials,
                      std::uint64_t seed, int workers) {
  guarded_subset_count(cloud.size(), k);
  const Label reference = exact_predict(model, cloud, k);
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  std::uint64_t violations = 0;
  std::string failure;
  for (std::uint64_t r = 1; r <= r_star; ++r) {
    const auto count = static_cast<std::ptrdiff_t>(trials);
#pragma omp parallel for num_threads(threads) schedule(dynamic, 16) reduction(+ : violations)
    for (std::ptrdiff_t trial = 0; trial < count; ++trial) {
      try {
        const auto attacked = random_attack(
            cloud, r, attack, stream_seed(seed, r * trials + static_cast<std::uint64_t>(trial)));
        if (attacked.size() < k || exact_predict(model, attacked, k) != reference) ++violations;
      } catch (const std::exception& e) {
#pragma omp critical(ptcert_falsify_error)
        if (failure.empty()) failure = e.what();
      }
    }
    if (!failure.empty()) throw std::runtime_error(failure);
  }
  return violations;
}

std::optional<std::uint64_t> certified_size_linear_scan(std::uint64_t n, std::uint64_t k,
                                                        const ExactRational& p_y,
                                                        const ExactRational& p_e,
                                                        AttackModel attack) {
  if (p_y <= p_e) return std::nullopt;
  std::uint64_t limit = ~std::uint64_t{0};
  if (attack == AttackModel::kModification || attack == AttackModel::kDeletion) limit = n - 1;
  if (attack == AttackModel::kPerturbation) limit = n;
  std::uint64_t r = 0;
  while (r < limit && condition_holds(n, k, r + 1, p_y, p_e, attack)) ++r;
  return r;
}

std::vector<std::uint64_t> attacked_sizes(std::uint64_t n, std::uint64_t r, AttackModel attack) {
  switch (attack) {
    case AttackModel::kModification:
      return {n};
    case AttackModel::kAddition:
      return {n + r};
    case AttackModel::kDeletion:
      return {n - std::min(n, r)};
    case AttackModel::kPerturbation: {
      std::vector<std::uint64_t> out;
      for (std::uint64_t t = n > r ? n - r : 0; t <= n + r; ++t) out.push_back(t);
      return out;
    }
  }
  return {};
}

bool tightness_holds(std::uint64_t n, std::uint64_t k, const ExactRational& p_y,
                     const ExactRational& p_e, AttackModel attack, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why != nullptr) *why = msg;
    return false;
  };
  const auto r_star = certified_size(n, k, p_y, p_e, attack);
  if (!r_star) return fail("no certified size");

  for (std::uint64_t t : attacked_sizes(n, *r_star, attack)) {
    const auto w = tightness_witness(n, k, *r_star, t, p_y, p_e);
    if (w.mass_e >= w.mass_y) {
      return fail("witness at r* = " + std::to_string(*r_star) + ", t = " + std::to_string(t));
    }
  }

  const std::uint64_t next = *r_star + 1;
  const bool in_domain = attack == AttackModel::kAddition ||
                         (attack == AttackModel::kPerturbation ? next <= n : next < n);
  if (!in_domain) return true;
  for (std::uint64_t t : attacked_sizes(n, next, attack)) {
    if (t < k) return true;
    const auto w = tightness_witness(n, k, next, t, p_y, p_e);
    if (w.mass_e >= w.mass_y) return true;
  }
  return fail("no witness at r* + 1 = " + std::to_string(next));
}

std::vector<std::pair<ExactRational, ExactRational>> probability_grid_pairs(std::uint64_t n,
                                                                            std::uint64_t k,
                                                                            std::size_t cap) {
  const auto grid_opt = bounded_binomial(n, k, ~std::uint64_t{0} >> 2);
  if (!grid_opt) throw std::invalid_argument("grid too large");
  const std::uint64_t grid = *grid_opt;
  std::set<std::pair<std::uint64_t, std::uint64_t>> chosen;
  const unsigned __int128 total = static_cast<unsigned __int128>(grid) * (grid + 1) / 2;
  if (total <= cap) {
    for (std::uint64_t a = 1; a <= grid; ++a) {
      for (std::uint64_t b = 0; b < a; ++b) chosen.insert({a, b});
    }
  } else {
    chosen.insert({grid, 0});
    chosen.insert({grid, grid - 1});
    chosen.insert({1, 0});
    chosen.insert({grid / 2 + 1, grid / 2});
    chosen.insert({grid - grid / 10, grid / 10});
    SplitMix64 rng(stream_seed(n, k));
    while (chosen.size() < cap) {
      const std::uint64_t a = 1 + rng.below(grid);
      const std::uint64_t b = rng.below(a);
      chosen.insert({a, b});
    }
  }
  std::vector<std::pair<ExactRational, ExactRational>> out;
  out.reserve(chosen.size());
  const mpz_class denom(static_cast<unsigned long>(grid));
  for (const auto& [a, b] : chosen) {
    ExactRational py(mpz_class(static_cast<unsigned long>(a)), denom);
    ExactRational pe(mpz_class(static_cast<unsigned long>(b)), denom);
    py.canonicalize();
    pe.canonicalize();
    out.emplace_back(std::move(py), std::move(pe));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kMaxReportedFailures = 20;

void note(OracleSuiteReport& report, std::string msg) {
  if (report.failures.size() < kMaxReportedFailures) report.failures.push_back(std::move(msg));
}

std::string describe(std::uint64_t n, std::uint64_t k, const ExactRational& py,
                     const ExactRational& pe, AttackModel attack) {
  return std::string(attack_name(attack)) + " n=" + std::to_string(n) + " k=" + std::to_string(k) +
         " p_y=" + py.get_str() + " p_e=" + pe.get_str();
}

// Clouds on the x axis with a random share of positive coordinates; the
// remaining coordinates add variety without affecting the x-based labels.
PointCloud oracle_cloud(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const double positive_share = 0.5 + 0.5 * rng.uniform();
  std::vector<double> coords;
  for (std::size_t i = 0; i < n; ++i) {
    const double magnitude = 0.1 + rng.uniform();
    coords.push_back(rng.uniform() < positive_share ? magnitude : -magnitude);
    coords.push_back(rng.uniform() - 0.5);
    coords.push_back(0.0);
  }
  return PointCloud::from_flat(3, std::move(coords));
}

}  // namespace

std::vector<FunctionClassifier> closed_form_classifiers() {
  std::vector<FunctionClassifier> out;
  out.emplace_back(2, 3, [](const PointCloud& c) -> Label {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < c.size(); ++i) pos += c.point(i)[0] > 0.0;
    return pos >= c.size() - pos ? 1 : 0;
  });
  out.emplace_back(3, 3, [](const PointCloud& c) -> Label {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < c.size(); ++i) pos += c.point(i)[0] > 0.0;
    return std::min<Label>(2, 3 * pos / (c.size() + 1));
  });
  out.emplace_back(2, 3, [](const PointCloud& c) -> Label {
    double best = c.point(0)[0];
    for (std::size_t i = 1; i < c.size(); ++i) best = std::max(best, c.point(i)[0]);
    return best > 0.0 ? 0 : 1;
  });
  return out;
}

OracleSuiteReport run_oracle_suite(const OracleSuiteOptions& options) {
  OracleSuiteReport report;
  const std::size_t max_n = std::max<std::size_t>(options.max_n, 1);
  const std::size_t max_k = options.max_k;

  // Search equivalence and tightness over exact grid bounds.
  for (std::uint64_t n = 1; n <= max_n; ++n) {
    for (std::uint64_t k = 1; k <= std::min<std::uint64_t>(max_k, n); ++k) {
      for (const auto& [py, pe] : probability_grid_pairs(n, k, options.grid_cap)) {
        for (AttackModel attack : kAllAttacks) {
          ++report.search_cases;
          if (certified_size(n, k, py, pe, attack) != certified_size_linear_scan(n, k, py, pe, attack)) {
            ++report.search_mismatches;
            note(report, "search mismatch: " + describe(n, k, py, pe, attack));
          }
          if (py + pe <= 1) {
            ++report.witness_cases;
            std::string why;
            if (!tightness_holds(n, k, py, pe, attack, &why)) {
              ++report.witness_failures;
              note(report, "tightness: " + describe(n, k, py, pe, attack) + ": " + why);
            }
          }
        }
      }
    }
  }

  // Region probabilities against enumeration on concrete clouds.
  const std::size_t region_max = std::min<std::size_t>(max_n, 8);
  for (std::uint64_t n = 1; n <= region_max; ++n) {
    for (std::uint64_t t = 1; t <= region_max; ++t) {
      for (std::uint64_t s = 0; s <= std::min(n, t); ++s) {
        std::vector<double> a;
        std::vector<double> b;
        for (std::uint64_t i = 0; i < s; ++i) {
          a.insert(a.end(), {static_cast<double>(i), 0.0, 0.0});
          b.insert(b.end(), {static_cast<double>(i), 0.0, 0.0});
        }
        for (std::uint64_t i = s; i < n; ++i) a.insert(a.end(), {static_cast<double>(i), 1.0, 0.0});
        for (std::uint64_t i = s; i < t; ++i) b.insert(b.end(), {static_cast<double>(i), 2.0, 0.0});
        const auto original = PointCloud::from_flat(3, std::move(a));
        const auto perturbed = PointCloud::from_flat(3, std::move(b));
        for (std::uint64_t k = 1; k <= std::min<std::uint64_t>({max_k, n, t}); ++k) {
          ++report.region_cases;
          if (region_probs(n, t, s, k) != enumerate_region_probs(original, perturbed, k)) {
            ++report.region_mismatches;
            note(report, "region mismatch n=" + std::to_string(n) + " t=" + std::to_string(t) +
                             " s=" + std::to_string(s) + " k=" + std::to_string(k));
          }
        }
      }
    }
  }

  // Soundness: certified sizes from exact probabilities never flip the
  // exact prediction under random attacks.
  const auto classifiers = closed_form_classifiers();
  for (std::uint64_t n = 4; n <= max_n; ++n) {
    for (std::uint64_t k = 1; k <= std::min<std::uint64_t>(max_k, n); ++k) {
      for (std::size_t ci = 0; ci < classifiers.size(); ++ci) {
        const auto& model = classifiers[ci];
        const std::uint64_t instance_seed = stream_seed(options.seed, (n * 16 + k) * 8 + ci);
        const auto cloud = oracle_cloud(n, instance_seed);
        const auto exact = exact_bounds(exact_label_probs_serial(model, cloud, k));
        const auto rounded = round_bounds(exact.p_y, exact.p_e, n, k);
        if (rounded.p_y <= rounded.p_e) continue;
        ++report.falsify_instances;
        for (AttackModel attack : kAllAttacks) {
          const auto r_star = certified_size(n, k, rounded.p_y, rounded.p_e, attack);
          if (!r_star || *r_star == 0) continue;
          report.falsify_attacks += *r_star * options.trials;
          const auto violations = falsify(model, cloud, k, attack, *r_star, options.trials,
                                          stream_seed(instance_seed, static_cast<std::uint64_t>(attack)));
          if (violations > 0) {
            report.falsify_violations += violations;
            note(report, "falsified: " + describe(n, k, rounded.p_y, rounded.p_e, attack) +
                             " r*=" + std::to_string(*r_star) + " classifier " + std::to_string(ci));
          }
        }
      }
    }
  }
  return report;
}

}  // namespace ptcert
