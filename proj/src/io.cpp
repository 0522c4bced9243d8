#include "amfem/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

namespace amfem {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::map<std::string, std::string> parse_key_value(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(ErrorCode::config, "line " + std::to_string(lineno) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::config, "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::config, "line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    kv[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

void write_solution_elements_csv(std::ostream& out, const MixedSolution& sol) {
  out << "element,u_h,div_p_h,f_h\n";
  for (int e = 0; e < sol.mesh->num_elements(); ++e)
    out << e << ',' << format_number(sol.u[e]) << ',' << format_number(sol.flux(e).div()) << ','
        << format_number(sol.f_h[e]) << '\n';
}

void write_solution_edges_csv(std::ostream& out, const MixedSolution& sol) {
  out << "edge,v0,v1,flux\n";
  for (int id = 0; id < sol.mesh->num_edges(); ++id) {
    const Edge& edge = sol.mesh->edge(id);
    out << id << ',' << edge.v[0] << ',' << edge.v[1] << ',' << format_number(sol.p[id]) << '\n';
  }
}

void write_indicator_csv(std::ostream& out, const IndicatorReport& est, const OscReport& osc) {
  out << "element,h,data,curl,jump,displacement,eta2,osc_curl,osc_jump,osc_data,osc_displacement\n";
  for (int e = 0; e < est.size(); ++e) {
    out << e << ',' << format_number(est.h[e]) << ',' << format_number(est.data[e]) << ','
        << format_number(est.curl[e]) << ',' << format_number(est.jump[e]) << ','
        << format_number(est.displacement[e]) << ',' << format_number(est.local[e]) << ','
        << format_number(osc.curl[e]) << ',' << format_number(osc.jump[e]) << ',' << format_number(osc.data[e])
        << ',' << format_number(osc.displacement[e]) << '\n';
  }
}

void write_trace_csv(std::ostream& out, const AdaptTrace& trace, bool with_timing) {
  out << "k,n_elem,n_flux_dofs,eta2,osc2,osc_f2,n_marked,E2,quasi_err,secs\n";
  for (const auto& r : trace.rows) {
    out << r.k << ',' << r.n_elem << ',' << r.n_flux_dofs << ',' << format_number(r.eta2) << ','
        << format_number(r.osc2) << ',' << format_number(r.osc_f2) << ',' << r.n_marked << ','
        << format_number(r.e2) << ',' << format_number(r.quasi_err) << ','
        << format_number(with_timing ? r.secs : 0.0) << '\n';
  }
}

void write_errors_csv(std::ostream& out, const AdaptTrace& trace) {
  out << "k,n_elem,flux_err2,div_err2,disp_err2,complexity,efficiency,residual,div_defect\n";
  for (const auto& r : trace.rows) {
    const double eff = std::sqrt(r.eta2 / (r.e2 + r.osc2));
    out << r.k << ',' << r.n_elem << ',' << format_number(r.flux_err2) << ',' << format_number(r.div_err2) << ','
        << format_number(r.disp_err2) << ',' << format_number(r.complexity) << ',' << format_number(eff) << ','
        << format_number(r.residual) << ',' << format_number(r.div_defect) << '\n';
  }
}

}  // namespace amfem
