#include "submfg/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#ifndef SUBMFG_BUILD_HASH
#define SUBMFG_BUILD_HASH "unknown"
#endif

namespace submfg {

namespace {

ojson vec_to_json(const Eigen::VectorXd& v) {
  ojson arr = ojson::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

const char* version_string() { return "0.1.0"; }

const char* build_hash() { return SUBMFG_BUILD_HASH; }

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fp));
  return std::string(buf);
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

ojson to_json(const ProbeWitness& w) {
  ojson j;
  j["check"] = w.check;
  if (w.i >= 0) j["i"] = w.i;
  if (w.j >= 0) j["j"] = w.j;
  j["t"] = w.t;
  if (w.x.size()) j["x"] = vec_to_json(w.x);
  if (w.x2.size()) j["x2"] = vec_to_json(w.x2);
  if (w.m.size()) j["m"] = vec_to_json(w.m);
  if (w.m2.size()) j["m2"] = vec_to_json(w.m2);
  if (w.a.size()) j["a"] = vec_to_json(w.a);
  if (w.a2.size()) j["a2"] = vec_to_json(w.a2);
  j["value"] = w.value;
  if (!w.note.empty()) j["note"] = w.note;
  return j;
}

ojson to_json(const CheckResult& c) {
  ojson j;
  j["name"] = c.name;
  j["pass"] = c.pass;
  j["worst"] = c.worst;
  j["n_evaluated"] = c.n_evaluated;
  if (!c.note.empty()) j["note"] = c.note;
  j["witnesses"] = ojson::array();
  for (const auto& w : c.witnesses) j["witnesses"].push_back(to_json(w));
  return j;
}

ojson to_json(const AssumptionReport& r) {
  ojson j;
  j["regime"] = r.regime == Regime::Separable ? "separable" : "nonseparable";
  j["pass"] = r.pass;
  j["checks"] = ojson::array();
  for (const auto& c : r.checks) j["checks"].push_back(to_json(c));
  return j;
}

ojson to_json(const RegularityReport& r) {
  ojson j;
  j["pass"] = r.pass;
  j["empirical_lambda"] = r.empirical_lambda;
  j["declared_lambda"] = r.declared_lambda;
  j["lip_drift"] = r.lip_drift;
  j["lip_sigma"] = r.lip_sigma;
  j["lip_dx_h"] = r.lip_dx_h;
  j["lip_da_h"] = r.lip_da_h;
  j["lip_dx_g"] = r.lip_dx_g;
  j["growth_dx_h"] = r.growth_dx_h;
  j["growth_dx_g"] = r.growth_dx_g;
  j["notes"] = r.notes;
  return j;
}

ojson to_json(const ConditionViolation& v) {
  ojson j;
  j["condition"] = v.condition;
  j["t"] = v.t;
  if (v.i >= 0) j["i"] = v.i;
  if (v.j >= 0) j["j"] = v.j;
  j["value"] = v.value;
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

ojson to_json(const LqBuildReport& r) {
  ojson j;
  j["pass"] = r.pass;
  j["conditions_checked"] = r.conditions_checked;
  j["violations"] = ojson::array();
  for (const auto& v : r.violations) j["violations"].push_back(to_json(v));
  return j;
}

ojson to_json(const DominanceReport& r) {
  ojson j;
  j["violation"] = r.violation;
  j["max_pointwise"] = r.max_pointwise;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  if (!r.pass) {
    j["outer"] = r.outer;
    j["inner"] = r.inner;
    j["step"] = r.step;
    j["comp"] = r.comp;
  }
  return j;
}

ojson to_json(const LatticeReport& r) {
  ojson j;
  j["max_meet_deviation"] = r.max_meet_deviation;
  j["max_join_deviation"] = r.max_join_deviation;
  j["mean_meet_deviation"] = r.mean_meet_deviation;
  j["mean_join_deviation"] = r.mean_join_deviation;
  j["n_steps"] = r.n_steps;
  return j;
}

ojson to_json(const MonotonicityProbeReport& r) {
  ojson j;
  j["n_checked"] = r.n_checked;
  j["n_violations"] = r.n_violations;
  j["worst_gap"] = r.worst_gap;
  if (r.n_violations > 0) {
    j["t"] = r.t;
    j["x_lo"] = vec_to_json(r.x_lo);
    j["x_hi"] = vec_to_json(r.x_hi);
    j["m_lo"] = vec_to_json(r.m_lo);
    j["m_hi"] = vec_to_json(r.m_hi);
    j["y_lo"] = vec_to_json(r.y_lo);
    j["y_hi"] = vec_to_json(r.y_hi);
    j["a_lo"] = vec_to_json(r.a_lo);
    j["a_hi"] = vec_to_json(r.a_hi);
  }
  return j;
}

ojson to_json(const IterationStats& s) {
  ojson j;
  j["iter"] = s.iter;
  j["distance"] = s.distance;
  j["violation"] = s.violation;
  j["w2_start"] = s.w2_start;
  j["w2_mid"] = s.w2_mid;
  j["w2_end"] = s.w2_end;
  j["picard_iters"] = s.picard_iters;
  j["picard_change"] = s.picard_change;
  j["summary_min_increment"] = s.summary_min_increment;
  j["wall_ms"] = s.wall_ms;
  return j;
}

ojson to_json(const ComparisonReport& r) {
  ojson j;
  j["v_state"] = r.v_state;
  j["max_state"] = r.max_state;
  j["adjoint_checked"] = r.adjoint_checked;
  if (r.adjoint_checked) {
    j["v_adjoint"] = r.v_adjoint;
    j["max_adjoint"] = r.max_adjoint;
  }
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  j["picard_iters_low"] = r.picard_iters_low;
  j["picard_iters_high"] = r.picard_iters_high;
  return j;
}

const char* direction_name(Direction d) {
  return d == Direction::Minimal ? "minimal" : "maximal";
}

const char* stop_reason_name(StopReason s) {
  switch (s) {
    case StopReason::TolReached: return "tol-reached";
    case StopReason::MaxIters: return "max-iters";
    case StopReason::Divergence: return "divergence";
  }
  return "unknown";
}

ojson run_to_json(const EquilibriumRun& run) {
  ojson j;
  j["direction"] = direction_name(run.direction);
  j["stop"] = stop_reason_name(run.stop);
  j["iterations"] = static_cast<int>(run.history.size());
  j["flagged"] = run.flagged;
  j["final_scale"] = run.final_scale;
  j["tol_used"] = run.tol_used;
  if (!run.history.empty()) {
    j["final_distance"] = run.history.back().distance;
    j["final_violation"] = run.history.back().violation;
  }
  j["plan_fingerprint"] = fingerprint_hex(run.plan_fingerprint);
  j["warnings"] = run.warnings;
  return j;
}

void write_history_csv(const std::string& path,
                       const std::vector<IterationStats>& history) {
  std::string text =
      "iter,distance,violation,w2_start,w2_mid,w2_end,picard_iters\n";
  for (const auto& s : history) {
    text += std::to_string(s.iter);
    text += ',';
    text += format_number(s.distance);
    text += ',';
    text += format_number(s.violation);
    text += ',';
    text += format_number(s.w2_start);
    text += ',';
    text += format_number(s.w2_mid);
    text += ',';
    text += format_number(s.w2_end);
    text += ',';
    text += std::to_string(s.picard_iters);
    text += '\n';
  }
  write_text_file(path, text);
}

void write_history_jsonl(const std::string& path,
                         const std::vector<IterationStats>& history) {
  std::string text;
  for (const auto& s : history) {
    text += to_json(s).dump();
    text += '\n';
  }
  write_text_file(path, text);
}

void write_table_csv(const std::string& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
  std::string text;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) text += ',';
    text += header[c];
  }
  text += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_table_csv: ragged row");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) text += ',';
      text += format_number(row[c]);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

void write_table_csv(const std::string& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::string text;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) text += ',';
    text += header[c];
  }
  text += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_table_csv: ragged row");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) text += ',';
      text += row[c];
    }
    text += '\n';
  }
  write_text_file(path, text);
}

void write_json_file(const std::string& path, const ojson& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace submfg
