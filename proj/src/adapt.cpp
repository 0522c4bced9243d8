#include "amfem/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace amfem {

std::vector<int> MarkSet::sorted() const {
  std::vector<int> s = ids;
  std::sort(s.begin(), s.end());
  return s;
}

MarkSet dorfler_mark(std::span<const double> eta2, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::config, "theta must lie in (0, 1]");
  if (eta2.empty()) throw Error(ErrorCode::config, "cannot mark an empty indicator report");
  MarkSet set;
  set.theta = theta;
  std::vector<int> order(eta2.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eta2[a] > eta2[b]; });
  double total = 0.0;
  for (int id : order) {
    if (!(eta2[id] >= 0.0)) throw Error(ErrorCode::config, "indicators must be non-negative");
    total += eta2[id];
  }
  set.total = total;
  if (total == 0.0) {
    set.all_zero = true;
    return set;
  }
  if (theta == 1.0) {
    // the full sum: every positive indicator, however small against the total
    for (int id : order) {
      if (eta2[id] == 0.0) break;
      set.ids.push_back(id);
      set.marked_sum += eta2[id];
    }
    return set;
  }
  const double target = theta * theta * total;
  for (int id : order) {
    if (set.marked_sum >= target) break;
    set.ids.push_back(id);
    set.marked_sum += eta2[id];
  }
  return set;
}

std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int j = 0; j <= 8; ++j) g.push_back(std::pow(10.0, -3.0 + 0.5 * j));
  return g;
}

void scan_contraction(AdaptTrace& trace, std::span<const double> grid) {
  trace.gamma_grid.assign(grid.begin(), grid.end());
  const auto& rows = trace.rows;
  if (rows.size() < 2 || std::isnan(rows.front().e2)) return;
  double best_alpha = std::numeric_limits<double>::infinity();
  double best_gamma = std::numeric_limits<double>::quiet_NaN();
  for (double gamma : grid) {
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
      const double a = rows[k].e2 + gamma * rows[k].eta2;
      const double b = rows[k + 1].e2 + gamma * rows[k + 1].eta2;
      worst = std::max(worst, b / a);
    }
    if (worst < best_alpha) {
      best_alpha = worst;
      best_gamma = gamma;
    }
  }
  trace.gamma = best_gamma;
  trace.alpha = best_alpha;
  for (auto& r : trace.rows) r.quasi_err = r.e2 + best_gamma * r.eta2;
}

namespace {

void fill_reference_errors(AdaptTrace& trace, const ProblemSpec& problem, const AdaptOptions& opt) {
  if (trace.history.empty() || !trace.final_mesh) return;
  // reference on uniform refinements of the finest solved mesh
  const MeshPtr finest = trace.history.back().mesh;
  int levels = opt.reference_levels;
  while (levels > 0 && static_cast<double>(finest->num_edges()) * std::pow(4.0, levels) > opt.reference_max_dofs)
    --levels;
  if (levels == 0) return;
  const MeshPtr ref_mesh = uniform_refine(finest, levels);
  const MixedSolution ref = solve_problem(ref_mesh, problem, opt.solver);
  trace.surrogate = true;
  trace.reference_levels = levels;
  for (std::size_t k = 0; k < trace.history.size(); ++k) {
    const ErrorTriple err = exact_errors(trace.history[k].solution, problem, &ref);
    auto& row = trace.rows[k];
    row.flux_err2 = err.flux * err.flux;
    row.div_err2 = err.div * err.div;
    row.disp_err2 = err.disp * err.disp;
    row.e2 = err.energy2();
  }
}

}  // namespace

AdaptTrace run_adaptive(const ProblemSpec& problem, const AdaptOptions& opt, MeshPtr initial) {
  if (!(opt.theta > 0.0 && opt.theta <= 1.0)) throw Error(ErrorCode::config, "theta must lie in (0, 1]");
  if (opt.bisections < 1) throw Error(ErrorCode::config, "b must be >= 1");
  if (!(opt.eps > 0.0) && opt.max_dofs <= 0) throw Error(ErrorCode::config, "set eps > 0 or a dof budget");

  AdaptTrace trace;
  trace.problem = problem.name;
  MeshPtr mesh = initial ? std::move(initial) : create_initial(problem.domain);
  trace.n0 = mesh->initial_size();
  long cumulative_marked = 0;

  for (int k = 0;; ++k) {
    if (opt.max_dofs > 0 && mesh->num_edges() > opt.max_dofs) {
      trace.stop_reason = "dof budget";
      break;
    }
    if (k >= opt.max_iterations) {
      trace.stop_reason = "iteration cap";
      break;
    }
    const auto start = std::chrono::steady_clock::now();
    MixedSolution sol;
    try {
      sol = solve_problem(mesh, problem, opt.solver);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::solver) throw;
      trace.error_tag = e.what();
      trace.stop_reason = "solver failure";
      break;
    }
    IndicatorReport est = opt.estimator == EstimatorKind::stress ? indicators_stress(*mesh, sol, problem)
                                                                : indicators_full(*mesh, sol, problem, opt.kappa);
    const OscReport osc = oscillations(*mesh, sol, problem);

    TraceRow row;
    row.k = k;
    row.n_elem = mesh->num_elements();
    row.n_flux_dofs = mesh->num_edges();
    row.eta2 = est.total;
    row.osc2 = osc.osc2;
    row.osc_f2 = osc.osc_f2;
    row.residual = sol.residual;
    row.div_defect = sol.div_defect;
    if (k > 0 && cumulative_marked > 0)
      row.complexity = static_cast<double>(row.n_elem - trace.n0) / static_cast<double>(cumulative_marked);
    if (problem.exact) {
      const ErrorTriple err = exact_errors(sol, problem);
      row.flux_err2 = err.flux * err.flux;
      row.div_err2 = err.div * err.div;
      row.disp_err2 = err.disp * err.disp;
      row.e2 = err.energy2();
    }

    const bool converged = opt.eps > 0.0 && std::sqrt(est.total) < opt.eps;
    std::vector<int> marked;
    if (!converged) {
      if (opt.mode == RefineMode::uniform) {
        marked.resize(mesh->num_elements());
        std::iota(marked.begin(), marked.end(), 0);
      } else {
        marked = dorfler_mark(est, opt.theta).sorted();
      }
    }
    row.n_marked = static_cast<int>(marked.size());

    RefineResult next;
    if (!marked.empty()) next = refine(mesh, marked, opt.bisections);
    row.secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.rows.push_back(row);
    if (opt.keep_history)
      trace.history.push_back(Iteration{mesh, std::move(sol), std::move(est), marked, next.refined_set});
    trace.final_mesh = mesh;

    if (converged) {
      trace.stop_reason = "eta below eps";
      break;
    }
    if (marked.empty()) {
      trace.stop_reason = "estimator vanished";
      break;
    }
    cumulative_marked += static_cast<long>(marked.size());
    mesh = next.mesh;
  }
  if (!trace.final_mesh) trace.final_mesh = mesh;

  if (!problem.exact && opt.keep_history && trace.error_tag.empty()) fill_reference_errors(trace, problem, opt);
  const auto grid = opt.gamma_grid.empty() ? default_gamma_grid() : opt.gamma_grid;
  scan_contraction(trace, grid);
  return trace;
}

ApproxResult approx_data(const ScalarField& f, const MeshPtr& mesh0, double eps, double theta_data, int max_iterations) {
  if (!(eps > 0.0)) throw Error(ErrorCode::config, "approx_data needs eps > 0");
  ApproxResult res;
  MeshPtr mesh = mesh0;
  for (int it = 0;; ++it) {
    const auto osc = data_oscillation(f, *mesh);
    double total = 0.0;
    for (double v : osc) total += v;
    if (!std::isfinite(total)) throw Error(ErrorCode::config, "source oscillation is not finite");
    res.rows.push_back({mesh->num_elements(), std::sqrt(total)});
    if (std::sqrt(total) <= eps) break;
    if (it >= max_iterations) throw Error(ErrorCode::config, "approx_data: iteration cap reached");
    const auto marked = dorfler_mark(osc, theta_data).sorted();
    mesh = refine(mesh, marked, 1).mesh;
  }
  res.mesh = mesh;
  return res;
}

AdaptTrace two_step(const ProblemSpec& problem, const AdaptOptions& options) {
  if (!(options.eps > 0.0)) throw Error(ErrorCode::config, "two_step needs eps > 0");
  const MeshPtr mesh0 = create_initial(problem.domain);
  ApproxResult approx = approx_data(problem.f, mesh0, 0.5 * options.eps);
  ProblemSpec projected = with_piecewise_source(problem, approx.mesh, project_f(problem.f, *approx.mesh));
  projected.f_piecewise_constant = true;
  AdaptOptions step2 = options;
  step2.eps = 0.5 * options.eps;
  AdaptTrace trace = run_adaptive(projected, step2, approx.mesh);
  trace.approx_rows = std::move(approx.rows);
  trace.problem = problem.name;
  return trace;
}

RateFit fit_rate(std::span<const TraceRow> rows, int n0, ErrorColumn column, int burn_in) {
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    if (r.k < burn_in || r.n_elem <= n0) continue;
    double err2 = 0.0;
    switch (column) {
      case ErrorColumn::flux: err2 = r.flux_err2; break;
      case ErrorColumn::energy: err2 = r.e2; break;
      case ErrorColumn::estimator: err2 = r.eta2; break;
      case ErrorColumn::total: err2 = r.e2 + r.osc2; break;
    }
    if (!(err2 > 0.0) || !std::isfinite(err2)) continue;
    xs.push_back(std::log(static_cast<double>(r.n_elem - n0)));
    ys.push_back(0.5 * std::log(err2));
  }
  if (xs.size() < 4) throw Error(ErrorCode::config, "fit_rate: fewer than four usable trace rows");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::config, "fit_rate: degenerate dof range");
  const double slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (my + slope * (xs[i] - mx));
    sse += r * r;
  }
  RateFit fit;
  fit.s = -slope;
  fit.stderr_ = std::sqrt(sse / (n - 2.0) / sxx);
  fit.lo = fit.s - 2.0 * fit.stderr_;
  fit.hi = fit.s + 2.0 * fit.stderr_;
  fit.points = static_cast<int>(xs.size());
  return fit;
}

}  // namespace amfem
