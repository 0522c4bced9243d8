#ifndef AMFEM_ADAPT_HPP
#define AMFEM_ADAPT_HPP

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amfem/estimate.hpp"
#include "amfem/fem.hpp"
#include "amfem/mesh.hpp"
#include "amfem/problems.hpp"

namespace amfem {

/// Doerfler set: marked_sum >= theta^2 * total with minimal cardinality.
struct MarkSet {
  std::vector<int> ids;  ///< in selection order (descending indicator, ties by id)
  double marked_sum = 0.0;
  double total = 0.0;
  double theta = 0.0;
  bool all_zero = false;  ///< every indicator vanished; nothing to mark

  /// ids sorted ascending.
  std::vector<int> sorted() const;
};

/// Greedy selection: sort eta_T^2 descending (ties by ascending id) and take
/// the shortest prefix reaching theta^2 of the total. theta in (0, 1].
MarkSet dorfler_mark(std::span<const double> eta2, double theta);
inline MarkSet dorfler_mark(const IndicatorReport& report, double theta) { return dorfler_mark(report.local, theta); }

enum class RefineMode { adaptive, uniform };

struct AdaptOptions {
  double theta = 0.5;
  int bisections = 1;
  double eps = 0.0;              ///< stop once eta < eps
  long max_dofs = 0;             ///< stop before solving on more flux dofs; 0 = unbounded
  int max_iterations = 200;
  RefineMode mode = RefineMode::adaptive;
  EstimatorKind estimator = EstimatorKind::stress;
  double kappa = 1.0;
  SolverKind solver = SolverKind::direct;
  bool keep_history = true;
  /// Surrogate errors for problems without an exact solution: the final mesh
  /// refined uniformly this many times (reduced while it exceeds reference_max_dofs).
  int reference_levels = 2;
  long reference_max_dofs = 600000;
  std::vector<double> gamma_grid;  ///< empty: 10^{-3}, 10^{-2.5}, ..., 10^{1}
};

struct TraceRow {
  int k = 0;
  int n_elem = 0;
  int n_flux_dofs = 0;
  double eta2 = 0.0;
  double osc2 = 0.0;
  double osc_f2 = 0.0;
  int n_marked = 0;
  double e2 = std::numeric_limits<double>::quiet_NaN();         ///< ||A^{-1/2}(p-p_k)||^2 + ||h div(p-p_k)||^2
  double quasi_err = std::numeric_limits<double>::quiet_NaN();  ///< e2 + gamma eta2
  double secs = 0.0;
  double flux_err2 = std::numeric_limits<double>::quiet_NaN();
  double div_err2 = std::numeric_limits<double>::quiet_NaN();
  double disp_err2 = std::numeric_limits<double>::quiet_NaN();
  double complexity = std::numeric_limits<double>::quiet_NaN();  ///< (#T_k - #T_0) / sum_{j<k} #M_j
  double residual = 0.0;
  double div_defect = 0.0;
};

/// Everything SOLVE/ESTIMATE/MARK produced at one iteration.
struct Iteration {
  MeshPtr mesh;
  MixedSolution solution;
  IndicatorReport estimate;
  std::vector<int> marked;   ///< ascending
  std::vector<int> refined;  ///< refined set towards the next mesh
};

struct ApproxRow {
  int n_elem = 0;
  double osc_f = 0.0;
};

struct AdaptTrace {
  std::string problem;
  int n0 = 0;  ///< #T_0
  std::vector<TraceRow> rows;
  std::vector<Iteration> history;  ///< filled when keep_history
  std::vector<ApproxRow> approx_rows;  ///< data approximation phase of two_step
  MeshPtr final_mesh;
  bool surrogate = false;  ///< e2 measured against a reference solution
  int reference_levels = 0;
  std::string stop_reason;
  std::string error_tag;   ///< non-empty if the loop aborted
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();  ///< best max ratio of consecutive quasi-errors
  std::vector<double> gamma_grid;
};

/// SOLVE -> ESTIMATE -> MARK -> REFINE until eta_k < eps, the dof budget
/// or the iteration cap is hit. Starts from `initial` or the domain's T_0.
AdaptTrace run_adaptive(const ProblemSpec& problem, const AdaptOptions& options, MeshPtr initial = nullptr);

struct ApproxResult {
  MeshPtr mesh;
  std::vector<ApproxRow> rows;
};

/// Greedy Doerfler refinement on h_T^2 ||f - f_h||^2_T until osc(f, T_H) <= eps.
ApproxResult approx_data(const ScalarField& f, const MeshPtr& mesh0, double eps, double theta_data = 0.6,
                         int max_iterations = 200);

/// Data approximation to eps/2, then the adaptive loop with the projected
/// source to eps/2.
AdaptTrace two_step(const ProblemSpec& problem, const AdaptOptions& options);

enum class ErrorColumn { flux, energy, estimator, total };

struct RateFit {
  double s = 0.0;       ///< error ~ (#T - #T_0)^{-s}
  double stderr_ = 0.0;
  double lo = 0.0;      ///< s - 2 stderr
  double hi = 0.0;
  int points = 0;
};

/// Least-squares slope of log(error) against log(#T_k - #T_0) over rows with
/// k >= burn_in; needs at least four usable rows.
RateFit fit_rate(std::span<const TraceRow> rows, int n0, ErrorColumn column, int burn_in = 2);

/// Fills quasi_err with the grid gamma minimising the largest ratio of
/// consecutive quasi-errors; stores gamma and that ratio in the trace.
void scan_contraction(AdaptTrace& trace, std::span<const double> grid);

std::vector<double> default_gamma_grid();

}  // namespace amfem

#endif
