#pragma once

// JSON and CSV emission for every report, plus EnergyHistory storage.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "json.hpp"

#include "cylmode/config.hpp"
#include "cylmode/errors.hpp"
#include "cylmode/functionals.hpp"
#include "cylmode/inequalities.hpp"
#include "cylmode/stokes.hpp"

#ifndef CYLMODE_CODE_HASH
#define CYLMODE_CODE_HASH "unversioned"
#endif

namespace cylmode {

using json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "cylmode-report-v1";

inline std::string code_hash() { return CYLMODE_CODE_HASH; }

// NaN and infinities are not JSON; they are written as null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json params_json(const Params& p) {
  return {{"nu", p.nu}, {"N", p.N},         {"delta", p.delta},         {"eta", p.eta},
          {"K", p.K},   {"m", p.m},         {"sigma", p.sigma},         {"small_eps", p.small_eps}};
}

inline json config_json(const ExperimentConfig& c) {
  json out = json::object();
  const auto pt = to_ptree(c);
  for (const auto& [sec, body] : pt) {
    json s = json::object();
    for (const auto& [key, val] : body) s[key] = val.data();
    out[sec] = s;
  }
  return out;
}

// Envelope shared by every report.
inline json report_envelope(const std::string& command, const ExperimentConfig& c) {
  return {{"schema", kReportSchema},
          {"command", command},
          {"code_hash", code_hash()},
          {"config", config_json(c)},
          {"config_text", serialize_config(c)}};
}

inline json to_json(const DecayReport& r, const Params& p) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"k", row.k}, {"j", row.j}, {"sup_norm", num(row.sup_norm)},
                    {"bound", num(row.bound)}, {"ratio", num(row.ratio)}});
  return {{"params", params_json(p)},
          {"per_mode", rows},
          {"ratios",
           {{"mean_mode", {num(r.mean_ratio[0]), num(r.mean_ratio[1])}},
            {"fitted_factor_per_k", {num(r.fitted_factor[0]), num(r.fitted_factor[1])}},
            {"target_factor", num(r.target_factor)}}},
          {"pass_flags",
           {{"rate_j0", r.rate_pass[0]}, {"rate_j1", r.rate_pass[1]}, {"no_cascade", r.no_cascade}}},
          {"metadata",
           {{"regime", r.anisotropic ? "ans" : "ns"},
            {"K", r.K},
            {"N", r.N},
            {"horizon", r.horizon},
            {"snapshots", r.snapshots},
            {"truncation_leakage", num(r.truncation_leakage)},
            {"vertical_direction", "periodic surrogate"},
            {"gradient", "meridional (d_r, d_z)"}}}};
}

inline std::string decay_csv(const DecayReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << "k,j,sup_norm,bound,ratio\n";
  for (const auto& row : r.rows) os << row.k << ',' << row.j << ',' << row.sup_norm << ',' << row.bound << ',' << row.ratio << '\n';
  return os.str();
}

inline json to_json(const ScanReport& r) {
  return {{"check", r.check},
          {"p", r.p},
          {"trials", r.trials},
          {"seed", r.seed},
          {"max_ratio", num(r.max_ratio)},
          {"median_ratio", num(r.median_ratio)},
          {"max_ratio_fine", num(r.max_ratio_fine)},
          {"median_ratio_fine", num(r.median_ratio_fine)},
          {"refinement_delta", num(r.refinement_delta)},
          {"poincare_max", num(r.poincare_max)},
          {"pointwise_violations", r.pointwise_violations},
          {"vertical_direction", r.periodic_surrogate ? "periodic zero-mean surrogate" : "n/a"}};
}

inline json to_json(const SmallnessResult& s) {
  return {{"ns_lhs", num(s.ns_lhs)},   {"ans_lhs1", num(s.ans_lhs1)}, {"ans_lhs2", num(s.ans_lhs2)},
          {"eps", s.eps},             {"ns_pass", s.ns_pass},        {"ans_pass", s.ans_pass}};
}

inline json to_json(const LinearFlowReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"j", row.j},
                    {"sup_norm2", num(row.sup_norm2)},
                    {"int_grad_r", num(row.int_grad_r)},
                    {"int_weighted", num(row.int_weighted)},
                    {"profile_norm2", num(row.profile_norm2)},
                    {"ratio", num(row.ratio)}});
  return {{"N", r.N}, {"T", r.T}, {"dt", r.dt}, {"rows", rows},
          {"identity_residual", num(r.identity_residual)},
          {"identity_residual_naive", num(r.identity_residual_naive)}};
}

inline json to_json(const Lemma33Table& t) {
  auto vec = [](const std::vector<double>& v) {
    json a = json::array();
    for (std::size_t k = 1; k < v.size(); ++k) a.push_back(num(v[k]));
    return a;
  };
  return {{"mean_L4L4L2", {num(t.eq38[0]), num(t.eq38[1])}},
          {"modes_L4L4L2_j0", vec(t.eq39[0])},
          {"modes_L4L4L2_j1", vec(t.eq39[1])},
          {"mean_Linf_v", num(t.eq310a)},
          {"modes_L4L4Linf", vec(t.eq310b)},
          {"modes_grad_Linf", vec(t.eq310c)}};
}

// EnergyHistory round trip.
inline json to_json(const EnergyHistory& h) {
  auto norms = [](const ModeNorms& n) { return json::array({n.l2, n.grad, n.grad_r, n.over_r}); };
  auto mixed = [](const MixedNorms& m) {
    return json::array({m.l4h_l2v[0], m.l4h_l2v[1], m.l4h_linf, m.grad_l2h_linf, m.over_r_l2h_linf});
  };
  const auto raw = h.raw();
  json integ = json::array(), last = json::array(), prev = json::array(), mi = json::array(), ml = json::array();
  for (std::size_t k = 0; k < raw.integ.size(); ++k) {
    json a = json::array(), b = json::array(), c = json::array();
    for (std::size_t j = 0; j < raw.integ[k].size(); ++j) {
      a.push_back(norms(raw.integ[k][j]));
      b.push_back(norms(raw.last[k][j]));
      c.push_back(norms(raw.prev[k][j]));
    }
    integ.push_back(a);
    last.push_back(b);
    prev.push_back(c);
    mi.push_back(mixed(raw.mixed_integ[k]));
    ml.push_back(mixed(raw.last_mixed[k]));
  }
  return {{"kind", "energy-history"},
          {"params", params_json(h.params())},
          {"j_max", h.j_max()},
          {"mixed", h.mixed_enabled()},
          {"snapshot_cadence", h.snapshot_cadence},
          {"profile_norms", h.profile_norms},
          {"times", raw.times},
          {"sup", raw.sup},
          {"integ", integ},
          {"last", last},
          {"prev", prev},
          {"integral_error", raw.err},
          {"mixed_integ", mi},
          {"last_mixed", ml},
          {"series", raw.series}};
}

inline EnergyHistory history_from_json(const json& j) {
  try {
    if (j.at("kind") != "energy-history") throw IoError("not an energy history");
    const json& pj = j.at("params");
    Params p;
    p.nu = pj.at("nu");
    p.N = pj.at("N");
    p.delta = pj.at("delta");
    p.eta = pj.at("eta");
    p.K = pj.at("K");
    p.m = pj.at("m");
    p.sigma = pj.at("sigma");
    p.small_eps = pj.at("small_eps");
    EnergyHistory h(p, j.at("j_max").get<int>(), j.at("mixed").get<bool>());
    h.snapshot_cadence = j.at("snapshot_cadence");
    h.profile_norms = j.at("profile_norms").get<std::vector<double>>();
    auto norms = [](const json& a) {
      ModeNorms n;
      n.l2 = a.at(0);
      n.grad = a.at(1);
      n.grad_r = a.at(2);
      n.over_r = a.at(3);
      return n;
    };
    auto mixed = [](const json& a) {
      MixedNorms m;
      m.l4h_l2v[0] = a.at(0);
      m.l4h_l2v[1] = a.at(1);
      m.l4h_linf = a.at(2);
      m.grad_l2h_linf = a.at(3);
      m.over_r_l2h_linf = a.at(4);
      return m;
    };
    EnergyHistory::Raw raw;
    raw.times = j.at("times").get<std::vector<double>>();
    raw.sup = j.at("sup").get<std::vector<std::vector<double>>>();
    raw.series = j.at("series").get<std::vector<std::vector<double>>>();
    raw.err = j.at("integral_error").get<std::vector<std::vector<double>>>();
    const std::size_t K1 = static_cast<std::size_t>(p.K + 1);
    const std::size_t J1 = static_cast<std::size_t>(h.j_max() + 1);
    if (raw.sup.size() != K1 || j.at("integ").size() != K1 || j.at("last").size() != K1)
      throw IoError("energy history: mode count mismatch");
    for (std::size_t k = 0; k < K1; ++k) {
      if (raw.sup[k].size() != J1) throw IoError("energy history: derivative count mismatch");
      std::vector<ModeNorms> a, b, c;
      for (std::size_t jj = 0; jj < J1; ++jj) {
        a.push_back(norms(j.at("integ").at(k).at(jj)));
        b.push_back(norms(j.at("last").at(k).at(jj)));
        c.push_back(norms(j.at("prev").at(k).at(jj)));
      }
      raw.integ.push_back(a);
      raw.last.push_back(b);
      raw.prev.push_back(c);
      raw.mixed_integ.push_back(mixed(j.at("mixed_integ").at(k)));
      raw.last_mixed.push_back(mixed(j.at("last_mixed").at(k)));
    }
    h.restore(std::move(raw));
    return h;
  } catch (const json::exception& e) {
    throw IoError(std::string("energy history: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("energy history: ") + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError("corrupt JSON in '" + path + "': " + e.what());
  }
}

}  // namespace cylmode
