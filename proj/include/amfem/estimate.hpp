#ifndef AMFEM_ESTIMATE_HPP
#define AMFEM_ESTIMATE_HPP

#include <span>
#include <vector>

#include "amfem/fem.hpp"
#include "amfem/mesh.hpp"
#include "amfem/problems.hpp"

namespace amfem {

enum class EstimatorKind { stress, full };

/// Squared local indicators. For the stress estimator
///   eta_T^2 = h_T^2 ||f - f_h||^2 + h_T^2 ||curl(A^{-1} p_h)||^2 + h_T ||J(A^{-1} p_h . tau)||^2_{dT},
/// for the full estimator the data term becomes ||h^kappa (f + div p_h)||^2
/// and ||h (A^{-1} p_h - grad_h u_h)||^2 is added. h_T = |T|^{1/2}.
struct IndicatorReport {
  EstimatorKind kind = EstimatorKind::stress;
  double kappa = 0.0;
  std::vector<double> data;
  std::vector<double> curl;
  std::vector<double> jump;
  std::vector<double> displacement;  ///< zero for the stress estimator
  std::vector<double> h;
  std::vector<double> local;  ///< eta_T^2
  double total = 0.0;         ///< sum of `local` in ascending element order

  int size() const { return static_cast<int>(local.size()); }
  /// Sum of eta_T^2 over `ids` (ascending id order).
  double sum_over(std::span<const int> ids) const;
};

/// Squared oscillation terms with projection degree 1 on elements and 2 on edges.
struct OscReport {
  std::vector<double> curl;          ///< h_T^2 ||P_1 curl(A^{-1} p_h)||^2
  std::vector<double> jump;          ///< h_T ||P_2 J(A^{-1} p_h . tau)||^2_{dT}
  std::vector<double> data;          ///< ||h (f - f_h)||^2_T
  std::vector<double> displacement;  ///< ||h P_1 (A^{-1} p_h - grad_h u_h)||^2_T
  std::vector<double> local;         ///< osc_T(p_h, T)^2 = curl + jump + data
  double osc2 = 0.0;                 ///< sum of `local`
  double osc_f2 = 0.0;               ///< osc^2(f, T)
  double osc_tilde2 = 0.0;           ///< curl + jump + displacement
};

IndicatorReport indicators_stress(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem);

/// kappa in [0, 1], otherwise Error(config).
IndicatorReport indicators_full(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem,
                                double kappa);

OscReport oscillations(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem);

/// (A^{-1} p_h . tau)|_{T+} - (A^{-1} p_h . tau)|_{T-} at the 4 Gauss points
/// of the edge, ordered along the tangent. On a boundary edge the one-sided
/// trace minus the tangential derivative of the Dirichlet data.
std::vector<double> tangential_jump(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem,
                                    int edge);

/// Per-element h_T^2 ||f - f_h||^2_T.
std::vector<double> data_oscillation(const ScalarField& f, const Mesh& mesh);

/// osc^2(g, coarse) for g piecewise constant on `fine` (a refinement of
/// `coarse`), integrated exactly.
double piecewise_oscillation2(const Mesh& fine, std::span<const double> values, const Mesh& coarse);

}  // namespace amfem

#endif
