#ifndef AMFEM_IO_HPP
#define AMFEM_IO_HPP

#include <iosfwd>
#include <map>
#include <string>

#include "amfem/adapt.hpp"
#include "amfem/estimate.hpp"
#include "amfem/fem.hpp"

namespace amfem {

/// Shortest representation that reads back to the same double.
std::string format_number(double v);

/// Flat `key = value` text; blank lines and lines starting with '#' or ';'
/// are skipped, `[section]` headers prefix the following keys with "section.".
std::map<std::string, std::string> parse_key_value(std::istream& in);

/// element,u_h,div_p_h,f_h
void write_solution_elements_csv(std::ostream& out, const MixedSolution& sol);
/// edge,v0,v1,flux
void write_solution_edges_csv(std::ostream& out, const MixedSolution& sol);

/// element,h,data,curl,jump,displacement,eta2,osc_curl,osc_jump,osc_data,osc_displacement
void write_indicator_csv(std::ostream& out, const IndicatorReport& est, const OscReport& osc);

/// k,n_elem,n_flux_dofs,eta2,osc2,osc_f2,n_marked,E2,quasi_err,secs
/// `secs` is written as 0 unless `with_timing`, keeping the file reproducible.
void write_trace_csv(std::ostream& out, const AdaptTrace& trace, bool with_timing = false);

/// k,n_elem,flux_err2,div_err2,disp_err2,complexity,efficiency,residual,div_defect
void write_errors_csv(std::ostream& out, const AdaptTrace& trace);

}  // namespace amfem

#endif
