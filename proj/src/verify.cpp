#include "amfem/verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace amfem::verify {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

CheckResult make(std::string suite, std::string name, bool passed, double measured, double bound,
                 std::string detail) {
  return {std::move(suite), std::move(name), passed, measured, bound, std::move(detail)};
}

std::vector<std::string> labels(const Mesh& mesh) {
  std::vector<std::string> out;
  out.reserve(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) out.push_back(mesh.lineage(e).label());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> integer_report(Random& rng, int n) {
  std::vector<double> eta2(n);
  const bool coarse_values = rng.uniform() < 0.5;  // many ties
  for (auto& v : eta2) {
    if (rng.uniform() < 0.15)
      v = 0.0;
    else
      v = coarse_values ? 1 + rng.below(5) : 1 + rng.below(1000);
  }
  return eta2;
}

double random_theta(Random& rng) { return rng.uniform() < 0.1 ? 1.0 : 0.05 + 0.95 * rng.uniform(); }

AdaptTrace run_for_checks(const std::string& name, int bisections, long max_dofs, double theta = 0.5) {
  AdaptOptions opt;
  opt.theta = theta;
  opt.bisections = bisections;
  opt.max_dofs = max_dofs;
  opt.keep_history = true;
  return run_adaptive(builtin(name), opt);
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double f_scale(const std::vector<double>& f_h) {
  double m = 0.0;
  for (double v : f_h) m = std::max(m, std::abs(v));
  return 1.0 + m;
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"mesh", "dorfler", "pythagoras", "reduction", "oscillation", "upper_bound"};
}

MeshPtr random_refinement(Domain domain, Random& rng, int steps, double fraction) {
  MeshPtr mesh = create_initial(domain);
  for (int s = 0; s < steps; ++s) {
    std::vector<int> marked;
    for (int e = 0; e < mesh->num_elements(); ++e)
      if (rng.uniform() < fraction) marked.push_back(e);
    if (marked.empty()) marked.push_back(rng.below(mesh->num_elements()));
    mesh = refine(mesh, marked, 1).mesh;
  }
  return mesh;
}

CheckResult dorfler_bruteforce(std::uint64_t seed, int reports, int max_size) {
  Random rng(seed);
  int mismatches = 0, witness_failures = 0;
  for (int r = 0; r < reports; ++r) {
    const int n = 1 + rng.below(max_size);
    const auto eta2 = integer_report(rng, n);
    const double theta = random_theta(rng);
    const MarkSet set = dorfler_mark(eta2, theta);
    const double target = theta * theta * set.total;
    int best = n + 1;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      const int count = std::popcount(mask);
      if (count >= best) continue;
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) s += eta2[i];
      if (s >= target) best = count;
    }
    if (static_cast<int>(set.ids.size()) != best) ++mismatches;
    if (!set.ids.empty()) {
      // dropping the smallest member must break the property
      double smallest = eta2[set.ids.front()];
      for (int id : set.ids) smallest = std::min(smallest, eta2[id]);
      if (set.marked_sum - smallest >= target && smallest > 0.0) ++witness_failures;
      if (set.marked_sum < target) ++mismatches;
    }
  }
  return make("dorfler", "greedy_equals_bruteforce", mismatches == 0 && witness_failures == 0,
              mismatches + witness_failures, 0.0,
              std::to_string(reports) + " reports of <= " + std::to_string(max_size) + " elements, " +
                  std::to_string(mismatches) + " cardinality mismatches, " + std::to_string(witness_failures) +
                  " minimality-witness failures");
}

CheckResult dorfler_monotone(std::uint64_t seed, int reports) {
  Random rng(seed ^ 0x9e3779b97f4a7c15ULL);
  int violations = 0;
  for (int r = 0; r < reports; ++r) {
    const auto eta2 = integer_report(rng, 1 + rng.below(40));
    double t1 = random_theta(rng), t2 = random_theta(rng);
    if (t1 > t2) std::swap(t1, t2);
    const auto a = dorfler_mark(eta2, t1).sorted();
    const auto b = dorfler_mark(eta2, t2).sorted();
    if (!std::includes(b.begin(), b.end(), a.begin(), a.end())) ++violations;
  }
  return make("dorfler", "monotone_in_theta", violations == 0, violations, 0.0,
              std::to_string(reports) + " random theta pairs");
}

std::vector<CheckResult> mesh_refinement(std::uint64_t seed) {
  Random rng(seed);
  int conformity = 0, subset = 0, count_bound = 0, identical = 0, sequences = 0;
  double area_err = 0.0, shape_worst = 0.0, shape_bound = 0.0, uniform_err = 0.0;
  std::string first_problem;
  for (Domain d : {Domain::unit_square, Domain::lshape, Domain::checkerboard}) {
    const MeshPtr root = create_initial(d);
    // newest-vertex bisection generates finitely many similarity classes, all
    // present after a few uniform levels
    for (int level = 0; level <= 4; ++level) {
      const MeshPtr u = uniform_refine(root, level);
      for (int e = 0; e < u->num_elements(); ++e) shape_bound = std::max(shape_bound, shape_ratio(*u, e));
      if (level > 0) {
        const MeshPtr prev = uniform_refine(root, level - 1);
        const auto up = refine(prev, [&] {
          std::vector<int> all(prev->num_elements());
          for (int e = 0; e < prev->num_elements(); ++e) all[e] = e;
          return all;
        }());
        if (up.mesh->num_elements() != 2 * prev->num_elements()) uniform_err = std::max(uniform_err, 1.0);
        for (int e = 0; e < up.mesh->num_elements(); ++e)
          uniform_err = std::max(uniform_err,
                                 std::abs(2.0 * up.mesh->area(e) - prev->area(up.parent[e])) / prev->area(up.parent[e]));
      }
    }
    for (int s = 0; s < 10; ++s) {
      ++sequences;
      MeshPtr mesh = root;
      const double fraction = 0.05 + 0.35 * rng.uniform();
      for (int step = 0; step < 6; ++step) {
        std::vector<int> marked;
        for (int e = 0; e < mesh->num_elements(); ++e)
          if (rng.uniform() < fraction) marked.push_back(e);
        const int b = 1 + rng.below(2);
        const RefineResult res = refine(mesh, marked, b);
        if (auto bad = audit_conformity(*res.mesh)) {
          ++conformity;
          if (first_problem.empty()) first_problem = *bad;
        }
        if (!std::includes(res.refined_set.begin(), res.refined_set.end(), marked.begin(), marked.end())) ++subset;
        if (static_cast<int>(res.refined_set.size()) > res.mesh->num_elements() - mesh->num_elements()) ++count_bound;
        for (int e = 0; e < res.mesh->num_elements(); ++e) {
          const int parent = res.parent[e];
          const int depth = res.mesh->generation(e) - mesh->generation(parent);
          const double expect = std::ldexp(mesh->area(parent), -depth);
          area_err = std::max(area_err, std::abs(res.mesh->area(e) - expect) / expect);
          if (depth == 0)
            for (int i = 0; i < 3; ++i)
              if (!(res.mesh->vertex(e, i) == mesh->vertex(parent, i))) ++identical;
          shape_worst = std::max(shape_worst, shape_ratio(*res.mesh, e));
        }
        mesh = res.mesh;
      }
    }
  }
  const std::string runs = std::to_string(sequences) + " random sequences of 6 refinements";
  std::vector<CheckResult> out;
  out.push_back(make("mesh", "conformity", conformity == 0, conformity, 0.0,
                     runs + (first_problem.empty() ? "" : "; first violation: " + first_problem)));
  out.push_back(make("mesh", "marked_subset_of_refined", subset == 0, subset, 0.0, runs));
  out.push_back(make("mesh", "refined_count_bound", count_bound == 0, count_bound, 0.0,
                     "#refined <= #T_h - #T_H"));
  out.push_back(make("mesh", "area_halving", area_err <= 1e-12, area_err, 1e-12,
                     "max relative deviation of |child| from |parent| / 2^depth"));
  out.push_back(make("mesh", "unrefined_identical", identical == 0, identical, 0.0,
                     "vertices of elements outside the refined set"));
  out.push_back(make("mesh", "shape_regularity", shape_worst <= shape_bound * (1 + 1e-9), shape_worst, shape_bound,
                     "max diam^2/|T| vs the uniform-refinement classes"));
  out.push_back(make("mesh", "uniform_doubling", uniform_err <= 1e-12, uniform_err, 1e-12,
                     "one bisection of every element doubles #T and halves every area"));
  return out;
}

std::vector<CheckResult> overlay_bound(std::uint64_t seed, int pairs) {
  Random rng(seed + 1);
  int bound_violations = 0, commute = 0, nested = 0, conform = 0, assoc = 0, assoc_checked = 0;
  double worst_ratio = 0.0;
  const Domain domains[] = {Domain::unit_square, Domain::lshape, Domain::checkerboard};
  for (int i = 0; i < pairs; ++i) {
    const Domain d = domains[i % 3];
    const MeshPtr m1 = random_refinement(d, rng, 1 + rng.below(6), 0.05 + 0.4 * rng.uniform());
    const MeshPtr m2 = random_refinement(d, rng, 1 + rng.below(6), 0.05 + 0.4 * rng.uniform());
    const MeshPtr o = overlay(*m1, *m2);
    const int n0 = m1->initial_size();
    const int limit = m1->num_elements() + m2->num_elements() - n0;
    if (o->num_elements() > limit) ++bound_violations;
    worst_ratio = std::max(worst_ratio, static_cast<double>(o->num_elements()) / limit);
    if (labels(*o) != labels(*overlay(*m2, *m1))) ++commute;
    if (audit_conformity(*o)) ++conform;
    try {
      ancestor_map(*o, *m1);
      ancestor_map(*o, *m2);
    } catch (const Error&) {
      ++nested;
    }
    if (i % 10 == 0) {
      ++assoc_checked;
      const MeshPtr m3 = random_refinement(d, rng, 1 + rng.below(4), 0.2);
      if (labels(*overlay(*overlay(*m1, *m2), *m3)) != labels(*overlay(*m1, *overlay(*m2, *m3)))) ++assoc;
    }
  }
  const std::string runs = std::to_string(pairs) + " random pairs";
  std::vector<CheckResult> out;
  out.push_back(make("mesh", "overlay_cardinality", bound_violations == 0, bound_violations, 0.0,
                     runs + ", max #overlay / (#m1 + #m2 - #T0) = " + fmt(worst_ratio)));
  out.push_back(make("mesh", "overlay_commutative", commute == 0, commute, 0.0, runs));
  out.push_back(make("mesh", "overlay_associative", assoc == 0, assoc, 0.0,
                     std::to_string(assoc_checked) + " random triples"));
  out.push_back(make("mesh", "overlay_conforming_refinement", conform + nested == 0, conform + nested, 0.0,
                     "overlay is conforming and refines both inputs"));
  return out;
}

CheckResult pythagoras(const std::string& name, int coarse_levels, double theta) {
  const ProblemSpec pb = builtin(name);
  const MeshPtr mesh_H = uniform_refine(create_initial(pb.domain), coarse_levels);
  const MixedSolution sol_H = solve_problem(mesh_H, pb);
  const auto marked = dorfler_mark(indicators_stress(*mesh_H, sol_H, pb), theta).sorted();
  const MeshPtr mesh_h = refine(mesh_H, marked, 1).mesh;
  const MixedSolution sol_h = solve_problem(mesh_h, pb);
  const MixedSolution ref = solve_problem(uniform_refine(mesh_h, 2), pb);
  const double lhs = flux_difference2(ref, sol_H, pb);
  const double a = flux_difference2(ref, sol_h, pb);
  const double b = flux_difference2(sol_h, sol_H, pb);
  const double defect = std::abs(lhs - a - b) / lhs;
  return make("pythagoras", "pythagoras[" + name + "]", defect <= 1e-8, defect, 1e-8,
              "|LHS - RHS| / LHS with #T = " + std::to_string(mesh_H->num_elements()) + ", " +
                  std::to_string(mesh_h->num_elements()) + ", " + std::to_string(ref.mesh->num_elements()) +
                  "; LHS = " + fmt(lhs));
}

std::vector<CheckResult> reduction(const AdaptTrace& trace, const ProblemSpec& pb, int bisections) {
  const double lambda = 1.0 - std::pow(2.0, -0.5 * bisections);
  double worst_excess = -std::numeric_limits<double>::infinity();
  double worst_local = 0.0, worst_eta_growth = -std::numeric_limits<double>::infinity();
  double worst_osc_growth = -std::numeric_limits<double>::infinity();
  int steps = 0;
  for (std::size_t k = 0; k + 1 < trace.history.size(); ++k) {
    const Iteration& coarse = trace.history[k];
    const MeshPtr& fine = trace.history[k + 1].mesh;
    const MixedSolution q = prolongate(coarse.solution, fine, trace.history[k + 1].solution.f_h);
    const IndicatorReport est_c = indicators_stress(*coarse.mesh, coarse.solution, pb);
    const IndicatorReport est_f = indicators_stress(*fine, q, pb);
    const double bound = est_c.total - lambda * est_c.sum_over(coarse.marked);
    worst_excess = std::max(worst_excess, est_f.total - bound);
    worst_eta_growth = std::max(worst_eta_growth, (est_f.total - est_c.total) / est_c.total);
    const double osc_c = oscillations(*coarse.mesh, coarse.solution, pb).osc2;
    const double osc_f = oscillations(*fine, q, pb).osc2;
    // osc vanishes up to roundoff for piecewise constant data; measure growth
    // against a floor at the estimator's scale
    worst_osc_growth = std::max(worst_osc_growth, (osc_f - osc_c) / (osc_c + 1e-12 * est_c.total));
    const auto parent = ancestor_map(*fine, *coarse.mesh);
    for (int e = 0; e < fine->num_elements(); ++e) {
      if (fine->generation(e) != coarse.mesh->generation(parent[e])) continue;
      const double a = est_f.local[e], b = est_c.local[parent[e]];
      const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
      worst_local = std::max(worst_local, std::abs(a - b) / scale);
    }
    ++steps;
  }
  const std::string tag = "[" + trace.problem + ",b=" + std::to_string(bisections) + "]";
  const std::string over = std::to_string(steps) + " steps";
  std::vector<CheckResult> out;
  out.push_back(make("reduction", "fixed_field_reduction" + tag, steps > 0 && worst_excess <= 1e-10, worst_excess,
                     1e-10, over + ", max of eta_h^2(p_H) - eta_H^2(p_H) + lambda eta_H^2(p_H, M_H), lambda = " +
                                fmt(lambda)));
  out.push_back(make("reduction", "locality" + tag, worst_local <= 1e-9, worst_local, 1e-9,
                     over + ", max relative change of eta_T for unrefined T"));
  out.push_back(make("reduction", "estimator_monotone" + tag, worst_eta_growth <= 1e-12, worst_eta_growth, 1e-12,
                     over + ", max relative growth of eta(p_H) under refinement"));
  out.push_back(make("reduction", "oscillation_monotone" + tag, worst_osc_growth <= 1e-9, worst_osc_growth, 1e-9,
                     over + ", max growth of osc(p_H) under refinement relative to osc_H + 1e-12 eta_H"));
  return out;
}

CheckResult dominance(const AdaptTrace& trace, const ProblemSpec& pb) {
  double worst = 0.0;
  int violations = 0;
  for (const auto& it : trace.history) {
    const IndicatorReport est = indicators_stress(*it.mesh, it.solution, pb);
    const OscReport osc = oscillations(*it.mesh, it.solution, pb);
    for (int e = 0; e < est.size(); ++e) {
      if (osc.local[e] > est.local[e] * (1.0 + 1e-12)) ++violations;
      if (est.local[e] > 0.0) worst = std::max(worst, osc.local[e] / est.local[e]);
    }
  }
  return make("oscillation", "dominance[" + trace.problem + "]", violations == 0, worst, 1.0,
              std::to_string(trace.history.size()) + " iterates, max osc_T^2 / eta_T^2; " +
                  std::to_string(violations) + " violations");
}

CheckResult projected_data_oscillation(const AdaptTrace& trace, const ProblemSpec& pb) {
  double worst = -std::numeric_limits<double>::infinity();
  int pairs = 0;
  for (std::size_t k = 0; k + 1 < trace.history.size(); ++k) {
    const Mesh& coarse = *trace.history[k].mesh;
    const Mesh& fine = *trace.history[k + 1].mesh;
    const double lhs = piecewise_oscillation2(fine, trace.history[k + 1].solution.f_h, coarse);
    const double rhs = sum(data_oscillation(pb.f, coarse));
    worst = std::max(worst, std::sqrt(lhs) - std::sqrt(rhs));
    ++pairs;
  }
  return make("oscillation", "projected_data_oscillation[" + trace.problem + "]", pairs > 0 && worst <= 1e-12, worst,
              1e-12, std::to_string(pairs) + " nested pairs, max osc(f_h, T_H) - osc(f, T_H)");
}

CheckResult discrete_upper_bound(const AdaptTrace& trace, const ProblemSpec& pb) {
  std::vector<double> c;
  for (std::size_t k = 0; k + 1 < trace.history.size(); ++k) {
    const Iteration& it = trace.history[k];
    const double num = flux_difference2(trace.history[k + 1].solution, it.solution, pb);
    const IndicatorReport est = indicators_stress(*it.mesh, it.solution, pb);
    const double den = est.sum_over(it.refined) + sum(data_oscillation(pb.f, *it.mesh));
    c.push_back(num / den);
  }
  if (c.empty()) return make("upper_bound", "discrete_upper_bound[" + trace.problem + "]", false, 0, 0, "no steps");
  const std::size_t half = c.size() / 2;
  const double first = *std::max_element(c.begin(), c.begin() + std::max<std::size_t>(half, 1));
  const double worst = *std::max_element(c.begin(), c.end());
  const double second = half < c.size() ? *std::max_element(c.begin() + half, c.end()) : first;
  // bounded: finite, and the second half of the run does not exceed the first
  const bool ok = std::isfinite(worst) && second <= 2.0 * first;
  return make("upper_bound", "discrete_upper_bound[" + trace.problem + "]", ok, worst, 2.0 * first,
              std::to_string(c.size()) + " nested pairs, C_k = ||A^{-1/2}(p_h - p_H)||^2 / (eta_H^2(R) + osc^2(f)); "
              "max first half " + fmt(first) + ", max second half " + fmt(second));
}

CheckResult divergence_exactness(const AdaptTrace& trace, double tolerance) {
  double worst = 0.0;
  for (const auto& it : trace.history)
    worst = std::max(worst, it.solution.div_defect / f_scale(it.solution.f_h));
  return make("fem", "div_exactness[" + trace.problem + "]", worst <= tolerance, worst, tolerance,
              std::to_string(trace.history.size()) + " solves, max_T |div p_h + f_h| / (1 + ||f_h||_inf)");
}

std::vector<CheckResult> run_suite(std::string_view suite, std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto append = [&](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };
  const bool all = suite == "all";
  bool known = all;
  if (all || suite == "mesh") {
    known = true;
    append(mesh_refinement(seed));
    append(overlay_bound(seed));
  }
  if (all || suite == "dorfler") {
    known = true;
    out.push_back(dorfler_bruteforce(seed));
    out.push_back(dorfler_monotone(seed));
  }
  if (all || suite == "pythagoras") {
    known = true;
    out.push_back(pythagoras("square_pwconst"));
    out.push_back(pythagoras("checkerboard"));
  }
  if (all || suite == "reduction") {
    known = true;
    for (auto [name, b] : {std::pair{"square_sine", 1}, {"square_pwconst", 2}, {"checkerboard", 1},
                           {"lshape_singular", 1}}) {
      const AdaptTrace trace = run_for_checks(name, b, 4000);
      append(reduction(trace, builtin(name), b));
      out.push_back(divergence_exactness(trace));
    }
  }
  if (all || suite == "oscillation") {
    known = true;
    for (const char* name : {"square_sine", "checkerboard", "lshape_singular"}) {
      const AdaptTrace trace = run_for_checks(name, 1, 4000);
      const ProblemSpec pb = builtin(name);
      out.push_back(dominance(trace, pb));
      out.push_back(projected_data_oscillation(trace, pb));
    }
  }
  if (all || suite == "upper_bound") {
    known = true;
    for (const char* name : {"square_sine", "square_pwconst", "lshape_singular"}) {
      const AdaptTrace trace = run_for_checks(name, 1, 8000);
      out.push_back(discrete_upper_bound(trace, builtin(name)));
    }
  }
  if (!known) throw Error(ErrorCode::config, "unknown verification suite '" + std::string(suite) + "'");
  return out;
}

}  // namespace amfem::verify
