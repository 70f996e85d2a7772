#pragma once

// Command-line front end.
//
//   magsob <subcommand> [flags]
//
// Subcommands: energy, bbm, jdelta, qnp, pointwise, study, audit.
// Exit status: 0 success, 1 failed verdict, 2 usage error, 3 numeric-domain error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "magsob/config.hpp"
#include "magsob/error.hpp"
#include "magsob/fields.hpp"
#include "magsob/functionals.hpp"
#include "magsob/kernels.hpp"
#include "magsob/quadrature.hpp"
#include "magsob/studies.hpp"

namespace magsob::cli {

enum ExitCode : int { kOk = 0, kVerdictFailed = 1, kUsage = 2, kNumeric = 3 };

/// Flag values; unset flags leave the config (file or defaults) untouched.
struct Flags {
  std::optional<std::string> config;
  std::optional<int> dim;
  std::optional<std::string> field, potential, kernel, family, s_list, delta_list, x, mode, kind, rule, format, out;
  std::optional<double> p, delta, radius, h_min, h_max, tolerance;
  std::optional<int> nodes_per_dim, radial_count, sphere_order;
  std::optional<std::uint64_t> mc_seed, mc_count;
  std::optional<bool> mc;
};

/// Rows in the shared CSV layout plus free-form JSON details.
struct Output {
  std::string command;
  std::vector<double> params, values, est_errors;
  double reference = 0.0;
  std::vector<std::string> digests;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  void add(double param, const EnergyValue& e) {
    params.push_back(param);
    values.push_back(e.value);
    est_errors.push_back(e.estimated_error);
    digests.push_back(e.config_digest);
  }

  std::string csv() const {
    std::string out = "param,value,est_error,reference,residual\n";
    char buf[160];
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", params[i], values[i], est_errors[i],
                    reference, StudyReport::relative_error(values[i], reference));
      out += buf;
    }
    return out;
  }

  std::string json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["params"] = params;
    j["values"] = values;
    j["est_errors"] = est_errors;
    j["config_digests"] = digests;
    j["reference"] = reference;
    std::vector<double> res;
    for (double v : values) res.push_back(StudyReport::relative_error(v, reference));
    j["residual"] = res;
    j["details"] = details;
    return j.dump(2) + "\n";
  }
};

namespace detail {

inline void add_common_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "config file (key = value with [sections])");
  sub->add_option("--dim", f.dim, "spatial dimension N (1, 2, 3)");
  sub->add_option("--field", f.field, "scalar field name[:params]");
  sub->add_option("--potential", f.potential, "vector potential name[:params]");
  sub->add_option("--p", f.p, "exponent p > 1");
  sub->add_option("--kernel", f.kernel, "fractional:s=.. or truncated:s=..,R=..");
  sub->add_option("--family", f.family, "kernel family for sweeps (truncated, fractional)");
  sub->add_option("--s-list", f.s_list, "comma-separated s values");
  sub->add_option("--delta-list", f.delta_list, "comma-separated delta values");
  sub->add_option("--delta", f.delta, "threshold delta");
  sub->add_option("--x", f.x, "comma-separated point");
  sub->add_option("--mode", f.mode, "pointwise mode (bbm, jdelta)");
  sub->add_option("--kind", f.kind, "study kind (bbm, jdelta, pointwise)");
  sub->add_option("--radius", f.radius, "box half-width R");
  sub->add_option("--nodes-per-dim", f.nodes_per_dim, "box nodes per dimension");
  sub->add_option("--rule", f.rule, "box rule (gauss_legendre, trapezoid)");
  sub->add_option("--h-min", f.h_min, "radial grid lower end");
  sub->add_option("--h-max", f.h_max, "radial grid upper end");
  sub->add_option("--radial-count", f.radial_count, "radial nodes");
  sub->add_option("--sphere-order", f.sphere_order, "sphere rule order");
  sub->add_option("--mc", f.mc, "Monte Carlo for double integrals (true/false)");
  sub->add_option("--mc-seed", f.mc_seed, "Monte Carlo seed");
  sub->add_option("--mc-count", f.mc_count, "Monte Carlo samples");
  sub->add_option("--tolerance", f.tolerance, "study pass threshold");
  sub->add_option("--format", f.format, "csv or json");
  sub->add_option("--out", f.out, "output path (default stdout)");
}

inline RunConfig resolve_config(const Flags& f) {
  RunConfig c = f.config ? parse_config(*f.config) : RunConfig{};
  auto set = [&](const std::string& key, const auto& opt) {
    if (!opt) return;
    std::ostringstream os;
    os.precision(17);
    if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, bool>) {
      os << (*opt ? "true" : "false");
    } else {
      os << *opt;
    }
    apply_config_key(c, key, os.str());
  };
  set("dim", f.dim);
  set("field", f.field);
  set("potential", f.potential);
  set("p", f.p);
  set("kernel", f.kernel);
  set("family", f.family);
  set("s_list", f.s_list);
  set("delta_list", f.delta_list);
  set("delta", f.delta);
  set("x", f.x);
  set("mode", f.mode);
  set("kind", f.kind);
  set("tolerance", f.tolerance);
  set("radius", f.radius);
  set("nodes_per_dim", f.nodes_per_dim);
  set("rule", f.rule);
  set("radial.h_min", f.h_min);
  set("radial.h_max", f.h_max);
  set("radial.count", f.radial_count);
  set("sphere.order", f.sphere_order);
  set("mc.enabled", f.mc);
  set("mc.seed", f.mc_seed);
  set("mc.count", f.mc_count);
  set("output.format", f.format);
  set("output.path", f.out);
  c.validate();
  return c;
}

struct Problem {
  ScalarField u;
  VectorPotential A;
  QuadConfig q;
};

inline Problem make_problem(const RunConfig& c) {
  const CatalogSpec fs = parse_catalog_spec(c.field);
  const CatalogSpec ps = parse_catalog_spec(c.potential);
  return Problem{make_field(fs.name, c.dim, fs.params), make_potential(ps.name, c.dim, ps.params), c.quadrature()};
}

inline Point point_from(const RunConfig& c) {
  Point x(c.dim);
  if (c.x.empty()) {
    x[0] = 1.0;
  } else {
    for (int i = 0; i < c.dim; ++i) x[i] = c.x[i];
  }
  return x;
}

inline void describe(nlohmann::ordered_json& d, const RunConfig& c, const QuadConfig& q) {
  d["dim"] = c.dim;
  d["field"] = c.field;
  d["potential"] = c.potential;
  d["p"] = c.p;
  d["quadrature"] = q.describe();
}

inline void emit(const std::string& text, const RunConfig& c, std::ostream& out) {
  if (c.out.empty()) {
    out << text;
    out.flush();
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw UsageError("cannot open output file '" + c.out + "'");
  f << text;
  if (!f) throw UsageError("failed writing output file '" + c.out + "'");
}

inline int cmd_energy(const RunConfig& c, std::ostream& out) {
  Problem pr = make_problem(c);
  const EnergyValue e = local_energy(pr.u, pr.A, c.p, pr.q.box, pr.q.exec);
  BoxGrid fine = pr.q.box;
  fine.nodes_per_dim = pr.q.box.nodes_per_dim * 3 / 2;
  const EnergyValue ef = local_energy(pr.u, pr.A, c.p, fine, pr.q.exec);
  Output o;
  o.command = "energy";
  EnergyValue row = e;
  row.estimated_error = std::max(e.estimated_error, std::abs(e.value - ef.value));
  o.add(c.p, row);
  o.reference = ef.value;
  describe(o.details, c, pr.q);
  o.details["reference_nodes_per_dim"] = fine.nodes_per_dim;
  emit(c.format == "json" ? o.json() : o.csv(), c, out);
  return kOk;
}

inline int cmd_bbm(const RunConfig& c, std::ostream& out) {
  Problem pr = make_problem(c);
  const Mollifier rho = parse_kernel_spec(c.kernel, c.dim);
  const EnergyValue b = bbm_energy(pr.u, pr.A, rho, c.p, pr.q);
  const EnergyValue e = local_energy(pr.u, pr.A, c.p, pr.q.box, pr.q.exec);
  const double qnp = magsob::detail::q_reference(c.dim, c.p);
  Output o;
  o.command = "bbm";
  o.add(rho.concentration, b);
  o.reference = c.p * qnp * e.value;
  describe(o.details, c, pr.q);
  o.details["kernel"] = rho.label;
  o.details["local_energy"] = e.value;
  o.details["q_constant"] = qnp;
  emit(c.format == "json" ? o.json() : o.csv(), c, out);
  return kOk;
}

inline int cmd_jdelta(const RunConfig& c, std::ostream& out) {
  Problem pr = make_problem(c);
  const EnergyValue j = jdelta_energy(pr.u, pr.A, c.delta, c.p, pr.q);
  const EnergyValue e = local_energy(pr.u, pr.A, c.p, pr.q.box, pr.q.exec);
  const double qnp = magsob::detail::q_reference(c.dim, c.p);
  Output o;
  o.command = "jdelta";
  o.add(c.delta, j);
  o.reference = qnp * e.value;
  describe(o.details, c, pr.q);
  o.details["local_energy"] = e.value;
  o.details["q_constant"] = qnp;
  emit(c.format == "json" ? o.json() : o.csv(), c, out);
  return kOk;
}

inline int cmd_qnp(const RunConfig& c, std::ostream& out) {
  const int order = c.sphere_order.value_or(c.dim == 1 ? 1 : (c.dim == 2 ? 4096 : 400));
  const SphereRule rule = build_sphere_rule(c.dim, order);
  const QConstant qc = q_constant(c.dim, c.p, rule);
  Output o;
  o.command = "qnp";
  EnergyValue v;
  v.value = qc.value;
  v.estimated_error = std::abs(qc.quadrature - qc.closed_form);
  v.config_digest = digest_of("qnp;" + std::to_string(c.dim) + ";" + std::to_string(order));
  o.add(c.p, v);
  o.reference = qc.closed_form;
  o.details["dim"] = c.dim;
  o.details["p"] = c.p;
  o.details["quadrature"] = qc.quadrature;
  o.details["closed_form"] = qc.closed_form;
  o.details["crosscheck_residual"] = qc.crosscheck_residual;
  o.details["sphere_nodes"] = rule.size();
  emit(c.format == "json" ? o.json() : o.csv(), c, out);
  return kOk;
}

inline int cmd_pointwise(const RunConfig& c, std::ostream& out) {
  Problem pr = make_problem(c);
  const Point x = point_from(c);
  const SphereRule sphere = pr.q.sphere();
  const double qn = q_constant_closed_form(c.dim, 2.0);
  const double g = pr.u.identically_zero ? 0.0 : norm(magnetic_gradient(pr.u, pr.A, x));
  Output o;
  o.command = "pointwise";
  EnergyValue v;
  double param = 0.0;
  if (c.mode == "bbm") {
    const Mollifier rho = parse_kernel_spec(c.kernel, c.dim);
    v.value = pointwise_bbm_density(pr.u, pr.A, rho, x, pr.q.radial, sphere);
    param = rho.concentration;
    o.reference = 2.0 * qn * g * g;
    o.details["kernel"] = rho.label;
  } else {
    v.value = pointwise_jdelta(pr.u, pr.A, c.delta, x, pr.q.radial, sphere);
    param = c.delta;
    o.reference = qn * g * g;
  }
  v.config_digest = digest_of("pointwise;" + c.mode + ";" + pr.q.describe());
  o.add(param, v);
  describe(o.details, c, pr.q);
  o.details["mode"] = c.mode;
  o.details["x"] = c.x.empty() ? std::vector<double>(x.begin(), x.end()) : c.x;
  emit(c.format == "json" ? o.json() : o.csv(), c, out);
  return kOk;
}

inline void emit_report(const StudyReport& r, const RunConfig& c, std::ostream& out) {
  emit(c.format == "json" ? r.to_json().dump(2) + "\n" : r.to_csv(), c, out);
}

/// x grid for pointwise studies: trapezoid nodes on [-4, 4]^N.
inline BoxNodes pointwise_grid(int dim) {
  BoxGrid g;
  g.dim = dim;
  g.radius = 4.0;
  g.nodes_per_dim = dim == 1 ? 33 : (dim == 2 ? 17 : 9);
  g.rule = BoxRule::trapezoid;
  return g.nodes();
}

inline int cmd_study(const RunConfig& c, std::ostream& out) {
  Problem pr = make_problem(c);
  StudyOptions opt;
  if (c.tolerance) opt.tolerance = *c.tolerance;
  const KernelFamily family = kernel_family_from_string(c.family);
  StudyReport r;
  if (c.kind == "bbm") {
    r = bbm_convergence_study(pr.u, pr.A, c.p, c.s_list, family, pr.q, opt);
  } else if (c.kind == "jdelta") {
    r = jdelta_convergence_study(pr.u, pr.A, c.p, c.delta_list, pr.q, opt);
  } else {
    const PointwiseMode mode = pointwise_mode_from_string(c.mode);
    r = pointwise_convergence_study(pr.u, pr.A, pointwise_grid(c.dim),
                                    mode == PointwiseMode::bbm ? c.s_list : c.delta_list, mode, pr.q, family, opt);
  }
  emit_report(r, c, out);
  return r.passed() ? kOk : kVerdictFailed;
}

inline int cmd_audit(const RunConfig& c, std::ostream& out) {
  Problem pr = make_problem(c);
  const KernelFamily family = kernel_family_from_string(c.family);
  std::vector<Mollifier> kernels;
  for (double s : c.s_list) kernels.push_back(make_kernel(family, s, c.dim));
  const StudyReport r = bound_audit(pr.u, pr.A, c.p, kernels, c.delta_list, pr.q);
  emit_report(r, c, out);
  return r.passed() ? kOk : kVerdictFailed;
}

}  // namespace detail

/// Runs one invocation. argv[0] is the program name.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Magnetic Sobolev energies: local, nonlocal (BBM) and thresholded functionals"};
  app.require_subcommand(1);
  Flags flags;
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&, std::ostream&);
  };
  const Sub subs[] = {
      {"energy", "local magnetic energy int |grad u - iAu|_p^p", detail::cmd_energy},
      {"bbm", "nonlocal BBM energy for one kernel", detail::cmd_bbm},
      {"jdelta", "thresholded energy J_delta", detail::cmd_jdelta},
      {"qnp", "sphere constant Q_{N,p}", detail::cmd_qnp},
      {"pointwise", "pointwise density at --x", detail::cmd_pointwise},
      {"study", "convergence sweep (--kind bbm|jdelta|pointwise)", detail::cmd_study},
      {"audit", "inequality audit", detail::cmd_audit},
  };
  std::vector<CLI::App*> handles;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    detail::add_common_flags(sub, flags);
    handles.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  try {
    const RunConfig cfg = detail::resolve_config(flags);
    for (std::size_t i = 0; i < handles.size(); ++i) {
      if (handles[i]->parsed()) return subs[i].fn(cfg, out);
    }
    err << app.help();
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    for (auto* h : handles)
      if (h->parsed()) err << h->help();
    return kUsage;
  } catch (const NumericDomainError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv;
  argv.push_back("magsob");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace magsob::cli
