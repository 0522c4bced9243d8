#ifndef AMFEM_VERIFY_HPP
#define AMFEM_VERIFY_HPP

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "amfem/adapt.hpp"

namespace amfem::verify {

/// One checked invariant. `measured` is compared against `bound` in the sense
/// stated by `detail`; both are reported even when the check passes.
struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string detail;
};

/// mesh, dorfler, pythagoras, reduction, oscillation, upper_bound.
std::vector<std::string> suite_names();

/// Runs one suite (or "all"). Throws Error(config) for an unknown name.
std::vector<CheckResult> run_suite(std::string_view suite, std::uint64_t seed);

/// Uniform numbers from std::mt19937_64 mapped by hand, so sequences do not
/// depend on the standard library's distribution implementations.
class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  ///< [0, 1)
  int below(int n) { return static_cast<int>(uniform() * n); }                    ///< [0, n)

 private:
  std::mt19937_64 engine_;
};

/// A random refinement of the initial mesh of `domain`: `steps` rounds, each
/// marking every element with probability `fraction`.
MeshPtr random_refinement(Domain domain, Random& rng, int steps, double fraction);

// Individual checks, also used by the acceptance runner.

/// Greedy Doerfler cardinality equals the exhaustive minimum on `reports`
/// random reports of 1..max_size elements.
CheckResult dorfler_bruteforce(std::uint64_t seed, int reports = 100, int max_size = 12);
/// theta1 <= theta2 implies MarkSet(theta1) is a subset of MarkSet(theta2).
CheckResult dorfler_monotone(std::uint64_t seed, int reports = 100);

/// Conformity, marked subset of refined, exact area halving and bounded shape
/// ratio over randomized refinements of every built-in domain.
std::vector<CheckResult> mesh_refinement(std::uint64_t seed);
/// #(m1 + m2) <= #m1 + #m2 - #T_0, commutativity and nesting on random pairs.
std::vector<CheckResult> overlay_bound(std::uint64_t seed, int pairs = 200);

/// |LHS - RHS| / LHS for the nested triple T_H, refine(T_H, Doerfler), and
/// two uniform refinements of the latter as reference.
CheckResult pythagoras(const std::string& problem, int coarse_levels = 3, double theta = 0.5);

/// Fixed-field reduction eta_{k+1}^2(p_k) <= eta_k^2(p_k) - (1 - 2^{-b/2}) eta_k^2(p_k, M_k) + 1e-10,
/// locality (unrefined elements keep their indicator) and monotonicity of eta
/// and osc for the prolongated coarse field, over every step of `trace`.
std::vector<CheckResult> reduction(const AdaptTrace& trace, const ProblemSpec& problem, int bisections);

/// osc_T <= eta_T for every element of every iterate.
CheckResult dominance(const AdaptTrace& trace, const ProblemSpec& problem);

/// osc(f_h, T_H) <= osc(f, T_H) + 1e-12 on consecutive pairs, f_h the
/// projection of f on the finer mesh.
CheckResult projected_data_oscillation(const AdaptTrace& trace, const ProblemSpec& problem);

/// ||A^{-1/2}(p_{k+1} - p_k)||^2 / (eta_k^2(p_k, R_k) + osc^2(f, T_k)) along the run.
CheckResult discrete_upper_bound(const AdaptTrace& trace, const ProblemSpec& problem);

/// Largest max_T |div p_h + f_h| / (1 + ||f_h||_inf) over the iterates.
CheckResult divergence_exactness(const AdaptTrace& trace, double tolerance = 1e-9);

}  // namespace amfem::verify

#endif
