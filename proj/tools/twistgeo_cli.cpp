// Command-line surface over the twistgeo headers: loads chart or norm specs,
// dispatches the block evaluators, and emits deterministic reports.
//
// Exit codes: 0 success, 2 validation failure, 3 residual above threshold
// under --assert, 64 flag errors (usage on stderr).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include <twistgeo/chart.hpp>
#include <twistgeo/curves.hpp>
#include <twistgeo/einstein.hpp>
#include <twistgeo/finsler.hpp>
#include <twistgeo/killing.hpp>
#include <twistgeo/lc_blocks.hpp>
#include <twistgeo/oracle.hpp>
#include <twistgeo/report.hpp>
#include <twistgeo/specio.hpp>
#include <twistgeo/ss_blocks.hpp>
#include <twistgeo/sweep.hpp>

namespace tg = twistgeo;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kThreshold = 3;
constexpr int kUsage = 64;
const char* kBanner = "twistgeo 1.0.0";

// ---- small helpers ---------------------------------------------------------------

Eigen::VectorXd parse_point(const std::string& src) {
  std::vector<double> vals;
  size_t pos = 0;
  while (pos <= src.size()) {
    size_t c = src.find(',', pos);
    std::string tok = src.substr(pos, c == std::string::npos ? std::string::npos : c - pos);
    size_t lo = tok.find_first_not_of(" \t");
    if (lo == std::string::npos) throw tg::SpecIoError("empty entry in point list '" + src + "'");
    size_t hi = tok.find_last_not_of(" \t");
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok.substr(lo, hi - lo + 1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != hi - lo + 1) throw tg::SpecIoError("bad number '" + tok + "' in point list");
    vals.push_back(v);
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  Eigen::VectorXd out(static_cast<int>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) out[static_cast<int>(i)] = vals[i];
  return out;
}

std::string f3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string point_str(const Eigen::VectorXd& x) {
  std::string s = "(";
  for (int i = 0; i < x.size(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x[i]);
    s += buf;
    if (i + 1 < x.size()) s += ", ";
  }
  return s + ")";
}

nlohmann::json point_json(const Eigen::VectorXd& x) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < x.size(); ++i) a.push_back(x[i]);
  return a;
}

// Shared output selection.  Exactly one format is emitted per run; --out
// redirects it to a file, otherwise it goes to stdout.
struct EmitOpts {
  bool json = false;
  bool csv = false;
  std::string out;
};

void add_emit_flags(CLI::App* sub, EmitOpts& e) {
  sub->add_flag("--json", e.json, "emit the machine JSON report");
  sub->add_flag("--csv", e.csv, "emit the CSV table")->excludes("--json");
  sub->add_option("--out", e.out, "write the report to this path instead of stdout");
}

void deliver(const nlohmann::json& rep, const std::vector<std::string>& text,
             const std::vector<std::string>& header,
             const std::vector<std::vector<std::string>>& rows, const EmitOpts& e) {
  std::string payload;
  if (e.json) {
    payload = tg::json_dump17(rep);
  } else if (e.csv) {
    payload = tg::csv_table(header, rows);
  } else {
    payload = std::string(kBanner) + "\n";
    for (const std::string& line : text) payload += line + "\n";
  }
  if (!e.out.empty())
    tg::write_file(e.out, payload);
  else
    std::fwrite(payload.data(), 1, payload.size(), stdout);
}

nlohmann::json envelope(const std::string& cmdline, std::uint64_t seed) {
  nlohmann::json j;
  j["command"] = cmdline;
  j["seed"] = seed;
  return j;
}

// Chart loader shared by every non-Finsler subcommand: rejects norm specs and
// refuses to dispatch on a chart that fails validation.
tg::ProductSpec load_chart(const std::string& path) {
  nlohmann::json doc = tg::load_json(path);
  if (tg::is_finsler_json(doc))
    throw tg::SpecIoError(path + ": norm spec; use the `finsler` subcommand");
  tg::ProductSpec s = tg::product_spec_from_json(doc);
  tg::ValidationReport vr = tg::validate_spec(s);
  if (!vr.ok) {
    std::string msg = path + ": validation failed";
    for (const std::string& f : vr.failures) msg += "\n  " + f;
    throw tg::SpecIoError(msg);
  }
  return s;
}

void require_torsion(const tg::ProductSpec& s, const std::string& conn) {
  if (conn == "ss" && s.torsion.loc == tg::TorsionLoc::None)
    throw tg::SpecIoError("--connection ss needs a torsion vector in the spec");
}

tg::OracleData eval_connection(const tg::ProductSpec& s, const std::string& conn,
                               const Eigen::VectorXd& x) {
  return conn == "ss" ? tg::ss_oracle(s, x) : tg::lc_oracle(s, x);
}

// ---- validate --------------------------------------------------------------------

struct ValidateOpts {
  std::string spec;
  int samples = 40;
  std::uint64_t seed = 0;
  EmitOpts emit;
};

int cmd_validate(const ValidateOpts& o, const std::string& cmdline) {
  nlohmann::json doc = tg::load_json(o.spec);
  nlohmann::json rep = envelope(cmdline, o.seed);
  std::vector<std::string> text;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  if (tg::is_finsler_json(doc)) {
    tg::ProductFinslerSpec ps = tg::finsler_spec_from_json(doc);
    tg::NormCheck nc = tg::validate_norm(ps, o.samples, o.seed);
    rep["kind"] = "finsler";
    rep["spec_digest"] = tg::json_digest(tg::finsler_spec_to_json(ps));
    nlohmann::json factors = nlohmann::json::array();
    header = {"factor", "dim", "classification"};
    for (int k = 0; k < ps.factors(); ++k) {
      const tg::FinslerFactor& f = ps.factor(k);
      std::string cls = k == 0 ? "base" : "fiber";
      factors.push_back({{"name", f.name}, {"dim", f.dim}, {"role", cls}});
      text.push_back("factor " + f.name + ": dim " + std::to_string(f.dim) + " (" + cls + ")");
      rows.push_back({f.name, std::to_string(f.dim), cls});
    }
    rep["factors"] = factors;
    rep["norm_check"] = {{"samples", nc.samples},
                         {"min_norm", nc.min_norm},
                         {"max_euler", nc.max_euler},
                         {"max_homog", nc.max_homog},
                         {"pass", nc.pass()}};
    rep["ok"] = nc.pass();
    text.push_back("norm check: min_F=" + f3(nc.min_norm) + " euler=" + f3(nc.max_euler) +
                   " homogeneity=" + f3(nc.max_homog) + (nc.pass() ? " [ok]" : " [FAIL]"));
    deliver(rep, text, header, rows, o.emit);
    return nc.pass() ? kOk : kValidation;
  }

  tg::ProductSpec s = tg::product_spec_from_json(doc);
  tg::ValidationReport vr = tg::validate_spec(s);
  rep["kind"] = "chart";
  rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(s));
  rep["ok"] = vr.ok;
  rep["failures"] = vr.failures;
  rep["base_signature"] = vr.base_signature;
  bool any_twisted = false;
  nlohmann::json fibers = nlohmann::json::array();
  header = {"factor", "dim", "classification"};
  rows.push_back({"base", std::to_string(s.base.dim), "base"});
  text.push_back("base: dim " + std::to_string(s.base.dim));
  for (int i = 0; i < s.num_fibers(); ++i) {
    bool tw = i < static_cast<int>(vr.warp_is_twisted.size()) && vr.warp_is_twisted[i];
    any_twisted = any_twisted || tw;
    std::string cls = tw ? "twisted" : "warped";
    const tg::FiberSpec& f = s.fibers[static_cast<size_t>(i)];
    fibers.push_back({{"name", f.name},
                      {"dim", f.dim},
                      {"classification", cls},
                      {"signature", vr.fiber_signature[static_cast<size_t>(i)]}});
    text.push_back("fiber " + f.name + ": dim " + std::to_string(f.dim) + ", " + cls +
                   " scale");
    rows.push_back({f.name, std::to_string(f.dim), cls});
  }
  rep["fibers"] = fibers;
  rep["classification"] = any_twisted ? "multiply twisted product" : "warped product";
  text.push_back("classification: " + rep["classification"].get<std::string>());
  for (const std::string& f : vr.failures) text.push_back("FAIL: " + f);
  text.push_back(vr.ok ? "spec ok" : "spec INVALID");
  deliver(rep, text, header, rows, o.emit);
  return vr.ok ? kOk : kValidation;
}

// ---- curvature / ricci / scalar ----------------------------------------------------

struct PointwiseOpts {
  std::string spec;
  std::string connection = "lc";
  std::string at;
  int sweep = 0;  // points per axis; 0 = single point at the box center
  std::uint64_t seed = 0;
  EmitOpts emit;
};

void add_pointwise_flags(CLI::App* sub, PointwiseOpts& o) {
  sub->add_option("spec", o.spec, "chart spec JSON")->required();
  sub->add_option("--connection", o.connection, "lc | ss")
      ->check(CLI::IsMember({"lc", "ss"}));
  auto* at = sub->add_option("--at", o.at, "comma-separated evaluation point");
  sub->add_option("--sweep", o.sweep, "grid points per axis")->excludes(at);
  sub->add_option("--seed", o.seed, "echoed into the report");
}

Eigen::MatrixXd pointwise_points(const tg::ProductSpec& s, const PointwiseOpts& o) {
  if (!o.at.empty()) {
    Eigen::VectorXd x = parse_point(o.at);
    if (x.size() != s.total_dim())
      throw tg::SpecIoError("--at expects " + std::to_string(s.total_dim()) + " coordinates");
    return x.transpose();
  }
  if (o.sweep > 0) return tg::grid_points(s.domain_box, o.sweep);
  Eigen::VectorXd c = 0.5 * (s.domain_box.col(0) + s.domain_box.col(1));
  return c.transpose();
}

int cmd_curvature(const PointwiseOpts& o, const std::string& cmdline) {
  tg::ProductSpec s = load_chart(o.spec);
  require_torsion(s, o.connection);
  Eigen::MatrixXd pts = pointwise_points(s, o);
  int n = s.total_dim();
  auto coords = s.all_coords();

  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["connection"] = o.connection;
  rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(s));
  std::vector<std::string> text;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  double global_max = 0;
  Eigen::VectorXd worst = pts.row(0);
  nlohmann::json per_point = nlohmann::json::array();
  bool single = pts.rows() == 1;
  if (single)
    header = {"l", "i", "j", "k", "value"};
  else {
    header = coords;
    header.push_back("max_abs");
  }
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    Eigen::VectorXd x = pts.row(r);
    tg::OracleData od = eval_connection(s, o.connection, x);
    double mx = 0;
    for (double v : od.riemann) mx = std::max(mx, std::abs(v));
    if (mx > global_max) {
      global_max = mx;
      worst = x;
    }
    nlohmann::json entry;
    entry["point"] = point_json(x);
    entry["max_abs"] = mx;
    if (single) {
      nlohmann::json comps = nlohmann::json::array();
      for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
              double v = od.riemann[static_cast<size_t>(tg::idx4(n, l, i, j, k))];
              if (v != 0.0) {
                comps.push_back({{"l", l}, {"i", i}, {"j", j}, {"k", k}, {"value", v}});
                rows.push_back({std::to_string(l), std::to_string(i), std::to_string(j),
                                std::to_string(k), tg::fmt_sig17(v)});
              }
            }
      entry["components"] = comps;
      text.push_back("point " + point_str(x) + ": " + std::to_string(comps.size()) +
                     " nonzero components, max |R| = " + f3(mx));
    } else {
      std::vector<std::string> row;
      for (int i = 0; i < n; ++i) row.push_back(tg::fmt_sig17(x[i]));
      row.push_back(tg::fmt_sig17(mx));
      rows.push_back(row);
    }
    per_point.push_back(entry);
  }
  rep["points"] = per_point;
  rep["max_abs"] = global_max;
  rep["worst_point"] = point_json(worst);
  if (!single)
    text.push_back("sweep over " + std::to_string(pts.rows()) +
                   " points: max |R| = " + f3(global_max) + " at " + point_str(worst));
  deliver(rep, text, header, rows, o.emit);
  return kOk;
}

int cmd_ricci(const PointwiseOpts& o, const std::string& cmdline) {
  tg::ProductSpec s = load_chart(o.spec);
  require_torsion(s, o.connection);
  Eigen::MatrixXd pts = pointwise_points(s, o);
  int n = s.total_dim();
  auto coords = s.all_coords();

  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["connection"] = o.connection;
  rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(s));
  std::vector<std::string> text;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  double global_max = 0;
  Eigen::VectorXd worst = pts.row(0);
  nlohmann::json per_point = nlohmann::json::array();
  bool single = pts.rows() == 1;
  if (single)
    header = {"i", "j", "value"};
  else {
    header = coords;
    header.push_back("max_abs");
  }
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    Eigen::VectorXd x = pts.row(r);
    tg::OracleData od = eval_connection(s, o.connection, x);
    double mx = od.ricci.cwiseAbs().maxCoeff();
    if (mx > global_max) {
      global_max = mx;
      worst = x;
    }
    nlohmann::json entry;
    entry["point"] = point_json(x);
    entry["max_abs"] = mx;
    if (single) {
      nlohmann::json mat = nlohmann::json::array();
      for (int i = 0; i < n; ++i) {
        nlohmann::json rrow = nlohmann::json::array();
        for (int j = 0; j < n; ++j) {
          rrow.push_back(od.ricci(i, j));
          rows.push_back({std::to_string(i), std::to_string(j), tg::fmt_sig17(od.ricci(i, j))});
        }
        mat.push_back(rrow);
      }
      entry["ricci"] = mat;
      text.push_back("point " + point_str(x) + ": max |Ric| = " + f3(mx));
      for (int i = 0; i < n; ++i) {
        std::string line = "  ";
        for (int j = 0; j < n; ++j) line += (j ? "  " : "") + f3(od.ricci(i, j));
        text.push_back(line);
      }
    } else {
      std::vector<std::string> row;
      for (int i = 0; i < n; ++i) row.push_back(tg::fmt_sig17(x[i]));
      row.push_back(tg::fmt_sig17(mx));
      rows.push_back(row);
    }
    per_point.push_back(entry);
  }
  rep["points"] = per_point;
  rep["max_abs"] = global_max;
  rep["worst_point"] = point_json(worst);
  if (!single)
    text.push_back("sweep over " + std::to_string(pts.rows()) +
                   " points: max |Ric| = " + f3(global_max) + " at " + point_str(worst));
  deliver(rep, text, header, rows, o.emit);
  return kOk;
}

int cmd_scalar(const PointwiseOpts& o, const std::string& cmdline) {
  tg::ProductSpec s = load_chart(o.spec);
  require_torsion(s, o.connection);
  Eigen::MatrixXd pts = pointwise_points(s, o);
  int n = s.total_dim();
  auto coords = s.all_coords();

  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["connection"] = o.connection;
  rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(s));
  std::vector<std::string> text;
  std::vector<std::string> header = coords;
  header.push_back("scalar");
  std::vector<std::vector<std::string>> rows;

  std::vector<double> vals;
  nlohmann::json per_point = nlohmann::json::array();
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    Eigen::VectorXd x = pts.row(r);
    tg::OracleData od = eval_connection(s, o.connection, x);
    vals.push_back(od.scalar);
    per_point.push_back({{"point", point_json(x)}, {"scalar", od.scalar}});
    std::vector<std::string> row;
    for (int i = 0; i < n; ++i) row.push_back(tg::fmt_sig17(x[i]));
    row.push_back(tg::fmt_sig17(od.scalar));
    rows.push_back(row);
    if (pts.rows() == 1) text.push_back("scalar at " + point_str(x) + " = " + f3(od.scalar));
  }
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(vals.size());
  double var = 0, maxdev = 0;
  for (double v : vals) {
    var += (v - mean) * (v - mean);
    maxdev = std::max(maxdev, std::abs(v - mean));
  }
  double stddev = std::sqrt(var / static_cast<double>(vals.size()));
  rep["points"] = per_point;
  rep["mean"] = mean;
  rep["stddev"] = stddev;
  rep["max_dev"] = maxdev;
  if (pts.rows() > 1)
    text.push_back("sweep over " + std::to_string(pts.rows()) + " points: mean = " + f3(mean) +
                   ", stddev = " + f3(stddev) + ", max dev = " + f3(maxdev));
  deliver(rep, text, header, rows, o.emit);
  return kOk;
}

// ---- geodesic ----------------------------------------------------------------------

struct GeodesicOpts {
  std::string spec;
  std::string p0, v0;
  double span = 1.0;
  double step = 1e-3;
  double tol = 1e-8;
  bool assert_ = false;
  std::uint64_t seed = 0;
  EmitOpts emit;
};

int cmd_geodesic(const GeodesicOpts& o, const std::string& cmdline) {
  tg::ProductSpec s = load_chart(o.spec);
  int n = s.total_dim();
  Eigen::VectorXd p0 = parse_point(o.p0), v0 = parse_point(o.v0);
  if (p0.size() != n || v0.size() != n)
    throw tg::SpecIoError("--p0/--v0 expect " + std::to_string(n) + " coordinates");

  tg::CurveSegment c = tg::geodesic_integrate(s, p0, v0, 0.0, o.span, o.step);
  double drift = tg::velocity_norm_drift(s, c);

  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(s));
  rep["span"] = o.span;
  rep["step"] = o.step;
  rep["samples"] = c.times.size();
  rep["norm_drift"] = drift;
  auto coords = s.all_coords();
  std::vector<std::string> header = {"tau"};  // curve parameter; coordinates follow
  for (const std::string& name : coords) header.push_back(name);
  for (const std::string& name : coords) header.push_back("v_" + name);
  std::vector<std::vector<std::string>> rows;
  nlohmann::json samples = nlohmann::json::array();
  for (int k = 0; k < c.times.size(); ++k) {
    std::vector<std::string> row = {tg::fmt_sig17(c.times[k])};
    for (int i = 0; i < n; ++i) row.push_back(tg::fmt_sig17(c.points(k, i)));
    for (int i = 0; i < n; ++i) row.push_back(tg::fmt_sig17(c.velocities(k, i)));
    rows.push_back(row);
    samples.push_back({{"t", c.times[k]},
                       {"x", point_json(c.points.row(k))},
                       {"v", point_json(c.velocities.row(k))}});
  }
  rep["trajectory"] = samples;
  std::vector<std::string> text = {
      "geodesic over [0, " + f3(o.span) + "] at step " + f3(o.step) + ": " +
          std::to_string(c.times.size()) + " samples",
      "start " + point_str(p0) + " -> end " + point_str(c.points.row(c.times.size() - 1)),
      "g(v,v) drift = " + f3(drift) + (drift < o.tol ? " [ok]" : " [above tol]")};
  deliver(rep, text, header, rows, o.emit);
  return (o.assert_ && drift >= o.tol) ? kThreshold : kOk;
}

// ---- index-form ----------------------------------------------------------------------

struct IndexFormOpts {
  std::string spec, curve, field;
  bool assert_ = false;
  std::uint64_t seed = 0;
  EmitOpts emit;
};

int cmd_index_form(const IndexFormOpts& o, const std::string& cmdline) {
  tg::ProductSpec s = load_chart(o.spec);
  int n = s.total_dim();

  nlohmann::json cj = tg::load_json(o.curve);
  if (!cj.contains("p0") || !cj.contains("v0"))
    throw tg::SpecIoError(o.curve + ": curve file needs p0 and v0 arrays");
  auto vec_of = [&](const nlohmann::json& a, const char* what) {
    if (!a.is_array() || static_cast<int>(a.size()) != n)
      throw tg::SpecIoError(std::string(what) + " must be an array of " + std::to_string(n) +
                            " numbers");
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = a[static_cast<size_t>(i)].get<double>();
    return v;
  };
  Eigen::VectorXd p0 = vec_of(cj["p0"], "p0"), v0 = vec_of(cj["v0"], "v0");
  double t0 = cj.value("t0", 0.0);
  double span = cj.value("span", 1.0);
  double step = cj.value("step", 1e-3);
  tg::CurveSegment c = tg::geodesic_integrate(s, p0, v0, t0, t0 + span, step);

  nlohmann::json fj = tg::load_json(o.field);
  if (!fj.contains("components") || !fj["components"].is_array() ||
      static_cast<int>(fj["components"].size()) != n)
    throw tg::SpecIoError(o.field + ": field file needs " + std::to_string(n) +
                          " component expressions over t");
  std::vector<tg::Expr> comp;
  for (const auto& e : fj["components"])
    comp.push_back(tg::Expr::parse(e.get<std::string>(), {"t"}));
  tg::VariationField V = tg::make_variation(c.times, [&](double t) {
    Eigen::VectorXd v(n), arg(1);
    arg[0] = t;
    for (int i = 0; i < n; ++i) v[i] = comp[static_cast<size_t>(i)].eval(arg);
    return v;
  });
  double end_mag = std::max(V.values.row(0).cwiseAbs().maxCoeff(),
                            V.values.row(V.values.rows() - 1).cwiseAbs().maxCoeff());
  V.vanishes_at_ends = end_mag < 1e-10;

  double I = tg::index_form(s, c, V, V);
  double Ifd = tg::second_variation_fd(s, c, V);
  double gap = std::abs(I - Ifd);
  double thresh = std::max(1e-4, 1e-2 * std::abs(I));

  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(s));
  rep["curve_digest"] = tg::json_digest(cj);
  rep["field_digest"] = tg::json_digest(fj);
  rep["index_form"] = I;
  rep["second_variation"] = Ifd;
  rep["gap"] = gap;
  rep["threshold"] = thresh;
  rep["vanishes_at_ends"] = V.vanishes_at_ends;
  rep["pass"] = gap < thresh;
  std::vector<std::string> text = {
      "index form I(V,V) = " + f3(I), "second variation (finite difference) = " + f3(Ifd),
      "gap = " + f3(gap) + " vs threshold " + f3(thresh) + (gap < thresh ? " [ok]" : " [FAIL]")};
  if (!V.vanishes_at_ends)
    text.push_back("warning: field does not vanish at the endpoints (|V| = " + f3(end_mag) + ")");
  std::vector<std::vector<std::string>> rows = {
      {"index_form", tg::fmt_sig17(I)},
      {"second_variation", tg::fmt_sig17(Ifd)},
      {"gap", tg::fmt_sig17(gap)},
      {"threshold", tg::fmt_sig17(thresh)}};
  deliver(rep, text, {"key", "value"}, rows, o.emit);
  return (o.assert_ && gap >= thresh) ? kThreshold : kOk;
}

// ---- killing-check -------------------------------------------------------------------

struct KillingOpts {
  std::string spec, field;
  int grid = 5;
  double tol = 1e-6;
  bool assert_ = false;
  std::uint64_t seed = 0;
  EmitOpts emit;
};

int cmd_killing(const KillingOpts& o, const std::string& cmdline) {
  tg::ProductSpec s = load_chart(o.spec);
  const tg::VectorFieldSpec* K = nullptr;
  for (const tg::VectorFieldSpec& f : s.fields)
    if (f.name == o.field) K = &f;
  if (!K) {
    std::string have;
    for (const tg::VectorFieldSpec& f : s.fields) have += (have.empty() ? "" : ", ") + f.name;
    throw tg::SpecIoError("field '" + o.field + "' not declared in the spec" +
                          (have.empty() ? "" : " (have: " + have + ")"));
  }
  Eigen::MatrixXd grid = tg::grid_points(s.domain_box, o.grid);
  tg::KillingResidual kr = tg::killing_residual(s, *K, grid);
  bool killing = kr.max_abs < o.tol;

  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(s));
  rep["field"] = o.field;
  rep["grid_points"] = grid.rows();
  rep["max_residual"] = kr.max_abs;
  rep["worst_point"] = point_json(kr.worst_point);
  rep["killing"] = killing;
  std::vector<std::string> text = {
      "field " + o.field + ": max |L_K g| = " + f3(kr.max_abs) + " over " +
          std::to_string(grid.rows()) + " grid points",
      killing ? "Killing within tol " + f3(o.tol)
              : "NOT Killing (tol " + f3(o.tol) + "), witness " + point_str(kr.worst_point)};
  std::vector<std::vector<std::string>> rows = {
      {"field", o.field},
      {"max_residual", tg::fmt_sig17(kr.max_abs)},
      {"killing", killing ? "true" : "false"},
      {"worst_point", point_str(kr.worst_point)}};
  deliver(rep, text, {"key", "value"}, rows, o.emit);
  return (o.assert_ && !killing) ? kThreshold : kOk;
}

// ---- einstein-solve ------------------------------------------------------------------

struct EinsteinOpts {
  std::string family;
  double lambda = 0.0;
  double c0 = 1.0, c1 = 1.0, c2 = 0.0;
  int l = 1;
  std::string p;
  int grid = 5;
  bool assert_ = false;
  std::uint64_t seed = 0;
  EmitOpts emit;
};

nlohmann::json family_json(const tg::KasnerFamily& fam) {
  nlohmann::json j;
  j["note"] = fam.note;
  j["exponents"] = fam.params.p;
  j["fiber_dims"] = fam.params.l;
  j["zeta"] = fam.params.zeta;
  j["eta"] = fam.params.eta;
  j["lambda"] = fam.lambda;
  j["fiber_lambda"] = fam.fiber_lambda;
  j["profile"] = fam.phi.source();
  j["max_residual"] = fam.max_residual;
  j["verified"] = fam.verified;
  j["spec_digest"] = tg::json_digest(tg::product_spec_to_json(fam.spec));
  return j;
}

int cmd_einstein(const EinsteinOpts& o, const std::string& cmdline) {
  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["family"] = o.family;
  std::vector<std::string> text;
  std::vector<std::string> header = {"family", "branch", "lambda", "ode_residual",
                                     "einstein_residual", "verified"};
  std::vector<std::vector<std::string>> rows;
  bool ok = true;

  if (o.family == "grw") {
    if (o.l == 1) {
      double disc = 1.0 - 4.0 * o.lambda;
      std::string branch = std::abs(disc) < 1e-12 ? "double-root"
                           : disc > 0             ? "two-exponential"
                                                  : "oscillatory";
      tg::Expr f = tg::grw_einstein_solution(o.lambda, o.c1, o.c2);
      tg::detail::require_positive_on_grid(f, "scale function");
      double ode = tg::linear2_residual(f, -1.0, o.lambda, 0.0);
      tg::ProductSpec s = tg::line_base_spec({tg::make_einstein_fiber(1, 0.0)}, {f.source()},
                                             0.0, 1.0);
      tg::EinsteinResidual er =
          tg::einstein_residual(tg::make_semisym_context(s), o.lambda, o.grid);
      bool verified = ode < 1e-9 && er.max_abs < 1e-5;
      ok = verified;
      rep["branch"] = branch;
      rep["lambda"] = o.lambda;
      rep["profile"] = f.source();
      rep["ode_residual"] = ode;
      rep["einstein_residual"] = er.max_abs;
      rep["verified"] = verified;
      rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(s));
      text.push_back("scale profile f(t) = " + f.source());
      text.push_back("branch " + branch + ", lambda = " + f3(o.lambda));
      text.push_back("f'' - f' + lambda f residual = " + f3(ode));
      text.push_back("einstein residual on grid = " + f3(er.max_abs) +
                     (verified ? " [verified]" : " [FAIL]"));
      rows.push_back({"grw", branch, tg::fmt_sig17(o.lambda), tg::fmt_sig17(ode),
                      tg::fmt_sig17(er.max_abs), verified ? "true" : "false"});
    } else {
      if (o.lambda != 0.0)
        throw tg::PreconditionError(
            "grw with fiber dimension > 1 forces proportion 0; drop --lambda");
      tg::GRWFamily fam = tg::grw_einstein_highdim(o.l, o.c1, o.c2, o.grid);
      ok = fam.verified;
      rep["branch"] = fam.note;
      rep["lambda"] = fam.params.lambda;
      rep["fiber_lambda"] = fam.params.lambda_F;
      rep["profile"] = fam.f.source();
      rep["einstein_residual"] = fam.max_residual;
      rep["verified"] = fam.verified;
      rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(fam.spec));
      text.push_back("scale profile f(t) = " + fam.f.source());
      text.push_back("fiber dim " + std::to_string(o.l) +
                     ", fiber proportion = " + f3(fam.params.lambda_F));
      text.push_back("einstein residual on grid = " + f3(fam.max_residual) +
                     (fam.verified ? " [verified]" : " [FAIL]"));
      rows.push_back({"grw", fam.note, "0", "", tg::fmt_sig17(fam.max_residual),
                      fam.verified ? "true" : "false"});
    }
  } else if (o.family == "kasner2") {
    double pval = o.p.empty() ? 0.5 : parse_point(o.p)[0];
    std::vector<tg::KasnerFamily> fams =
        tg::kasner_einstein_families_two_fiber(o.c0, pval, std::min(o.grid, 4));
    nlohmann::json arr = nlohmann::json::array();
    for (const tg::KasnerFamily& fam : fams) {
      arr.push_back(family_json(fam));
      ok = ok && fam.verified;
      text.push_back(fam.note + ": residual = " + f3(fam.max_residual) +
                     (fam.verified ? " [verified]" : " [FAIL]"));
      rows.push_back({"kasner2", fam.note, tg::fmt_sig17(fam.lambda), "",
                      tg::fmt_sig17(fam.max_residual), fam.verified ? "true" : "false"});
    }
    rep["families"] = arr;
    rep["verified"] = ok;
  } else {  // kasner3
    Eigen::VectorXd pv = parse_point(o.p.empty() ? "1,1,4" : o.p);
    if (pv.size() != 3) throw tg::SpecIoError("--p expects three exponents for kasner3");
    tg::KasnerFamily fam = tg::kasner_einstein_family_three_fiber(
        {pv[0], pv[1], pv[2]}, o.c0, std::min(o.grid, 4));
    ok = fam.verified;
    rep["families"] = nlohmann::json::array({family_json(fam)});
    rep["verified"] = ok;
    text.push_back("exponents " + point_str(pv) + ", profile " + fam.phi.source());
    text.push_back(fam.note + ": residual = " + f3(fam.max_residual) +
                   (fam.verified ? " [verified]" : " [FAIL]"));
    rows.push_back({"kasner3", fam.note, tg::fmt_sig17(fam.lambda), "",
                    tg::fmt_sig17(fam.max_residual), fam.verified ? "true" : "false"});
  }
  deliver(rep, text, header, rows, o.emit);
  return (o.assert_ && !ok) ? kThreshold : kOk;
}

// ---- scalar-solve --------------------------------------------------------------------

struct ScalarSolveOpts {
  std::string family;
  double sbar = 0.0, sf = 0.0;
  double c1 = 1.0, c2 = 0.0;
  int l = 1;
  std::string p;
  int grid = 5;
  bool assert_ = false;
  std::uint64_t seed = 0;
  EmitOpts emit;
};

int cmd_scalar_solve(const ScalarSolveOpts& o, const std::string& cmdline) {
  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["family"] = o.family;
  std::vector<std::string> text;
  std::vector<std::vector<std::string>> rows;
  bool ok = true;

  if (o.family == "grw") {
    tg::ScalarFamily fam = tg::grw_scalar_solution(o.l, o.sbar, o.sf, o.c1, o.c2, o.grid);
    rep["fiber_dim"] = fam.l;
    rep["target_scalar"] = fam.Sbar;
    rep["fiber_scalar"] = fam.SF;
    rep["branch"] = fam.branch;
    rep["closed_form"] = fam.closed_form;
    if (fam.closed_form) {
      rep["profile"] = fam.f.source();
      rep["max_residual"] = fam.max_residual;
      rep["stddev"] = fam.stddev;
      rep["verified"] = fam.verified;
      rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(fam.spec));
      ok = fam.verified;
      text.push_back("branch " + fam.branch + ", f(t) = " + fam.f.source());
      text.push_back("scalar deviation on grid: max = " + f3(fam.max_residual) +
                     ", stddev = " + f3(fam.stddev) + (fam.verified ? " [verified]" : " [FAIL]"));
      rows.push_back({"max_residual", tg::fmt_sig17(fam.max_residual)});
      rows.push_back({"stddev", tg::fmt_sig17(fam.stddev)});
    } else {
      rep["samples"] = fam.w.times.size();
      text.push_back("branch " + fam.branch + ": numeric profile, " +
                     std::to_string(fam.w.times.size()) + " samples, f = w^" + f3(fam.wpow));
      rows.push_back({"samples", std::to_string(fam.w.times.size())});
    }
    rows.push_back({"branch", fam.branch});
  } else {  // kasner3
    Eigen::VectorXd pv = parse_point(o.p.empty() ? "1,1,4" : o.p);
    if (pv.size() != 3) throw tg::SpecIoError("--p expects three exponents for kasner3");
    tg::KasnerParams kp = tg::kasner_parameters({pv[0], pv[1], pv[2]}, {1, 1, 1});
    tg::KasnerFamily fam =
        tg::kasner_scalar_solution(kp, o.sbar, o.c1, o.c2, std::min(o.grid, 4));
    ok = fam.verified;
    rep["target_scalar"] = o.sbar;
    rep["branch"] = fam.note;
    rep["profile"] = fam.phi.source();
    rep["max_residual"] = fam.max_residual;
    rep["verified"] = fam.verified;
    rep["spec_digest"] = tg::json_digest(tg::product_spec_to_json(fam.spec));
    text.push_back("branch " + fam.note + ", profile " + fam.phi.source());
    text.push_back("scalar deviation on grid: max = " + f3(fam.max_residual) +
                   (fam.verified ? " [verified]" : " [FAIL]"));
    rows.push_back({"branch", fam.note});
    rows.push_back({"max_residual", tg::fmt_sig17(fam.max_residual)});
  }
  deliver(rep, text, {"key", "value"}, rows, o.emit);
  return (o.assert_ && !ok) ? kThreshold : kOk;
}

// ---- finsler ---------------------------------------------------------------------------

struct FinslerOpts {
  std::string spec;
  std::string op = "predicates";
  int samples = 20;
  double tol = 1e-6;
  bool assert_ = false;
  std::uint64_t seed = 0;
  EmitOpts emit;
};

int cmd_finsler(const FinslerOpts& o, const std::string& cmdline) {
  nlohmann::json doc = tg::load_json(o.spec);
  if (!tg::is_finsler_json(doc))
    throw tg::SpecIoError(o.spec + ": chart spec; the `finsler` subcommand needs a norm spec");
  tg::ProductFinslerSpec ps = tg::finsler_spec_from_json(doc);

  nlohmann::json rep = envelope(cmdline, o.seed);
  rep["spec_digest"] = tg::json_digest(tg::finsler_spec_to_json(ps));
  rep["op"] = o.op;
  rep["samples"] = o.samples;
  std::vector<std::string> text;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::mt19937_64 rng(o.seed);
  bool ok = true;

  if (o.op == "spray") {
    header = {"sample", "max_diff", "rel"};
    double worst = 0;
    nlohmann::json arr = nlohmann::json::array();
    for (int k = 0; k < o.samples; ++k) {
      auto [x, y] = tg::sample_xy(ps, rng);
      Eigen::VectorXd gs = tg::spray_structured(ps, x, y);
      Eigen::VectorXd gg = tg::spray_generic(ps, x, y);
      double diff = (gs - gg).cwiseAbs().maxCoeff();
      double rel = diff / std::max(1.0, gg.cwiseAbs().maxCoeff());
      worst = std::max(worst, rel);
      arr.push_back({{"x", point_json(x)}, {"y", point_json(y)}, {"max_diff", diff},
                     {"rel", rel}});
      rows.push_back({std::to_string(k), tg::fmt_sig17(diff), tg::fmt_sig17(rel)});
    }
    rep["points"] = arr;
    rep["max_rel"] = worst;
    ok = worst < o.tol;
    rep["pass"] = ok;
    text.push_back("structured vs generic spray over " + std::to_string(o.samples) +
                   " samples: max relative gap = " + f3(worst) + (ok ? " [ok]" : " [FAIL]"));
  } else if (o.op == "berwald") {
    header = {"sample", "max_B", "max_E"};
    double worstB = 0, worstE = 0;
    nlohmann::json arr = nlohmann::json::array();
    for (int k = 0; k < o.samples; ++k) {
      auto [x, y] = tg::sample_xy(ps, rng);
      tg::BerwaldData bd = tg::berwald_tensors(ps, x, y);
      double mb = 0;
      for (double v : bd.B) mb = std::max(mb, std::abs(v));
      double me = bd.E.cwiseAbs().maxCoeff();
      worstB = std::max(worstB, mb);
      worstE = std::max(worstE, me);
      arr.push_back({{"x", point_json(x)}, {"y", point_json(y)}, {"max_B", mb}, {"max_E", me}});
      rows.push_back({std::to_string(k), tg::fmt_sig17(mb), tg::fmt_sig17(me)});
    }
    rep["points"] = arr;
    rep["max_B"] = worstB;
    rep["max_E"] = worstE;
    ok = worstB < o.tol;
    text.push_back("berwald tensor over " + std::to_string(o.samples) + " samples: max |B| = " +
                   f3(worstB) + ", max |E| = " + f3(worstE));
    text.push_back(worstB < o.tol ? "berwald within tol " + f3(o.tol)
                                  : "NOT berwald at tol " + f3(o.tol));
  } else if (o.op == "cartan") {
    header = {"sample", "block_gap", "mixed", "y_residual"};
    double worst_gap = 0, worst_mixed = 0, worst_y = 0;
    nlohmann::json arr = nlohmann::json::array();
    for (int k = 0; k < o.samples; ++k) {
      auto [x, y] = tg::sample_xy(ps, rng);
      tg::CartanSplit cs = tg::cartan_tensor(ps, x, y);
      double yr = tg::cartan_y_residual(cs.generic, y);
      worst_gap = std::max(worst_gap, cs.max_block_gap);
      worst_mixed = std::max(worst_mixed, cs.max_mixed);
      worst_y = std::max(worst_y, yr);
      arr.push_back({{"x", point_json(x)}, {"y", point_json(y)},
                     {"block_gap", cs.max_block_gap}, {"mixed", cs.max_mixed},
                     {"y_residual", yr}});
      rows.push_back({std::to_string(k), tg::fmt_sig17(cs.max_block_gap),
                      tg::fmt_sig17(cs.max_mixed), tg::fmt_sig17(yr)});
    }
    rep["points"] = arr;
    rep["max_block_gap"] = worst_gap;
    rep["max_mixed"] = worst_mixed;
    rep["max_y_residual"] = worst_y;
    ok = std::max({worst_gap, worst_mixed, worst_y}) < o.tol;
    rep["pass"] = ok;
    text.push_back("cartan split over " + std::to_string(o.samples) +
                   " samples: block gap = " + f3(worst_gap) + ", mixed = " + f3(worst_mixed) +
                   ", C.y = " + f3(worst_y) + (ok ? " [ok]" : " [FAIL]"));
  } else {  // predicates
    tg::StructureReport sr = tg::structure_predicates(ps, o.samples, o.seed);
    tg::NormCheck nc = tg::validate_norm(ps, o.samples, o.seed);
    header = {"predicate", "holds", "max_residual", "tol"};
    nlohmann::json arr = nlohmann::json::array();
    for (const tg::PredicateResult& p : sr.results) {
      nlohmann::json pj = {{"name", p.name},
                           {"holds", p.holds},
                           {"max_residual", p.max_residual},
                           {"tol", p.tol}};
      if (!p.holds) {
        pj["witness_x"] = point_json(p.witness_x);
        pj["witness_y"] = point_json(p.witness_y);
      }
      arr.push_back(pj);
      text.push_back(p.name + ": " + (p.holds ? "holds" : "violated") + " (residual " +
                     f3(p.max_residual) +
                     (p.holds ? ")" : ") at x=" + point_str(p.witness_x) +
                                          " y=" + point_str(p.witness_y)));
      rows.push_back({p.name, p.holds ? "true" : "false", tg::fmt_sig17(p.max_residual),
                      tg::fmt_sig17(p.tol)});
    }
    rep["predicates"] = arr;
    rep["norm_check"] = {{"samples", nc.samples},
                         {"min_norm", nc.min_norm},
                         {"max_euler", nc.max_euler},
                         {"max_homog", nc.max_homog},
                         {"pass", nc.pass()}};
    ok = nc.pass();
    text.push_back("norm check: min_F=" + f3(nc.min_norm) + " euler=" + f3(nc.max_euler) +
                   " homogeneity=" + f3(nc.max_homog) + (ok ? " [ok]" : " [FAIL]"));
  }
  deliver(rep, text, header, rows, o.emit);
  return (o.assert_ && !ok) ? kThreshold : kOk;
}

// ---- oracle-diff ---------------------------------------------------------------------

struct OracleDiffOpts {
  std::string spec;  // optional: empty = randomized sweep
  std::string connection = "lc";
  int specs = 10;
  int points = 20;
  double tol = 1e-6;
  double tol_abs = 1e-8;
  bool assert_ = false;
  std::uint64_t seed = 0;
  EmitOpts emit;
};

int cmd_oracle_diff(const OracleDiffOpts& o, const std::string& cmdline) {
  tg::OracleDiffReport r;
  if (o.spec.empty()) {
    r = tg::oracle_diff_sweep(o.specs, o.points, o.seed, o.connection, o.tol, o.tol_abs);
  } else {
    tg::ProductSpec s = load_chart(o.spec);
    require_torsion(s, o.connection);
    r = tg::oracle_diff_single(s, o.points, o.seed, o.connection, o.tol, o.tol_abs);
  }

  nlohmann::json rep = envelope(cmdline, o.seed);
  rep.update(tg::to_json(r));
  std::vector<std::string> text;
  std::vector<std::string> header = {"spec",      "digest",      "gamma_max", "riemann_max",
                                     "ricci_max", "scalar_max", "torsion_residual"};
  std::vector<std::vector<std::string>> rows;
  text.push_back("connection " + r.connection + ", " + std::to_string(r.per_spec.size()) +
                 " spec(s) x " + std::to_string(r.points) + " points, seed " +
                 std::to_string(r.seed));
  for (const tg::SpecDiff& d : r.per_spec) {
    text.push_back(d.name + ": gamma " + f3(d.gamma.max_diff) + ", riemann " +
                   f3(d.riemann.max_diff) + ", ricci " + f3(d.ricci.max_diff) + ", scalar " +
                   f3(d.scalar.max_diff) +
                   (r.connection == "ss" ? ", torsion " + f3(d.torsion_residual) : ""));
    rows.push_back({d.name, d.digest, tg::fmt_sig17(d.gamma.max_diff),
                    tg::fmt_sig17(d.riemann.max_diff), tg::fmt_sig17(d.ricci.max_diff),
                    tg::fmt_sig17(d.scalar.max_diff), tg::fmt_sig17(d.torsion_residual)});
  }
  for (const tg::FormulaDiscrepancy& d : r.discrepancies)
    text.push_back("DISCREPANCY " + d.spec + " " + d.object + " [" + d.clause +
                   "]: diff = " + f3(d.diff) + " at " + point_str(d.point));
  text.push_back(r.pass() ? "all structured evaluations match the oracle"
                          : std::to_string(r.discrepancies.size()) + " clause discrepancies");
  deliver(rep, text, header, rows, o.emit);
  return (o.assert_ && !r.pass()) ? kThreshold : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cmdline;
  for (int i = 0; i < argc; ++i) {
    if (i) cmdline += ' ';
    cmdline += argv[i];
  }

  CLI::App app{"numerical engine for multiply twisted pseudo-Riemannian products"};
  app.require_subcommand(1);

  ValidateOpts vo;
  auto* sv = app.add_subcommand("validate", "check a spec file and classify its scales");
  sv->add_option("spec", vo.spec, "spec JSON (chart or norm)")->required();
  sv->add_option("--samples", vo.samples, "norm-check samples for norm specs");
  sv->add_option("--seed", vo.seed, "sampling seed");
  add_emit_flags(sv, vo.emit);

  PointwiseOpts co, ro, so;
  auto* sc = app.add_subcommand("curvature", "curvature tensor of the chart connection");
  add_pointwise_flags(sc, co);
  add_emit_flags(sc, co.emit);
  auto* sr = app.add_subcommand("ricci", "ricci tensor of the chart connection");
  add_pointwise_flags(sr, ro);
  add_emit_flags(sr, ro.emit);
  auto* ss = app.add_subcommand("scalar", "scalar curvature of the chart connection");
  add_pointwise_flags(ss, so);
  add_emit_flags(ss, so.emit);

  GeodesicOpts go;
  auto* sg = app.add_subcommand("geodesic", "integrate a geodesic and track g(v,v)");
  sg->add_option("spec", go.spec, "chart spec JSON")->required();
  sg->add_option("--p0", go.p0, "start point (comma separated)")->required();
  sg->add_option("--v0", go.v0, "start velocity (comma separated)")->required();
  sg->add_option("--span", go.span, "parameter span");
  sg->add_option("--step", go.step, "integrator step");
  sg->add_option("--tol", go.tol, "drift threshold for --assert");
  sg->add_flag("--assert", go.assert_, "exit 3 when the drift exceeds --tol");
  sg->add_option("--seed", go.seed, "echoed into the report");
  add_emit_flags(sg, go.emit);

  IndexFormOpts io;
  auto* si = app.add_subcommand("index-form", "index form vs finite-difference variation");
  si->add_option("spec", io.spec, "chart spec JSON")->required();
  si->add_option("--curve", io.curve, "curve JSON: p0, v0, optional t0/span/step")->required();
  si->add_option("--field", io.field, "field JSON: per-coordinate expressions over t")
      ->required();
  si->add_flag("--assert", io.assert_, "exit 3 when the gap exceeds the acceptance threshold");
  si->add_option("--seed", io.seed, "echoed into the report");
  add_emit_flags(si, io.emit);

  KillingOpts ko;
  auto* sk = app.add_subcommand("killing-check", "lie derivative of the metric along a field");
  sk->add_option("spec", ko.spec, "chart spec JSON")->required();
  sk->add_option("--field", ko.field, "name of a field declared in the spec")->required();
  sk->add_option("--grid", ko.grid, "grid points per axis");
  sk->add_option("--tol", ko.tol, "killing threshold");
  sk->add_flag("--assert", ko.assert_, "exit 3 when the field is not killing at --tol");
  sk->add_option("--seed", ko.seed, "echoed into the report");
  add_emit_flags(sk, ko.emit);

  EinsteinOpts eo;
  auto* se = app.add_subcommand("einstein-solve", "construct and verify einstein scale families");
  se->add_option("--family", eo.family, "grw | kasner2 | kasner3")
      ->required()
      ->check(CLI::IsMember({"grw", "kasner2", "kasner3"}));
  se->add_option("--lambda", eo.lambda, "einstein proportion (grw)");
  se->add_option("--c0", eo.c0, "profile amplitude (kasner)");
  se->add_option("--c1", eo.c1, "integration constant");
  se->add_option("--c2", eo.c2, "integration constant");
  se->add_option("--l", eo.l, "fiber dimension (grw)");
  se->add_option("--p", eo.p, "exponents: one value (kasner2) or three (kasner3)");
  se->add_option("--grid", eo.grid, "verification grid points per axis");
  se->add_flag("--assert", eo.assert_, "exit 3 when a family fails verification");
  se->add_option("--seed", eo.seed, "echoed into the report");
  add_emit_flags(se, eo.emit);

  ScalarSolveOpts qo;
  auto* sq = app.add_subcommand("scalar-solve", "constant scalar-curvature scale families");
  sq->add_option("--family", qo.family, "grw | kasner3")
      ->required()
      ->check(CLI::IsMember({"grw", "kasner3"}));
  sq->add_option("--sbar", qo.sbar, "target scalar curvature")->required();
  sq->add_option("--sf", qo.sf, "fiber scalar curvature (grw)");
  sq->add_option("--c1", qo.c1, "integration constant");
  sq->add_option("--c2", qo.c2, "integration constant");
  sq->add_option("--l", qo.l, "fiber dimension (grw)");
  sq->add_option("--p", qo.p, "three exponents (kasner3)");
  sq->add_option("--grid", qo.grid, "verification grid points per axis");
  sq->add_flag("--assert", qo.assert_, "exit 3 when a closed-form family fails verification");
  sq->add_option("--seed", qo.seed, "echoed into the report");
  add_emit_flags(sq, qo.emit);

  FinslerOpts fo;
  auto* sf = app.add_subcommand("finsler", "product norm operations on a norm spec");
  sf->add_option("spec", fo.spec, "norm spec JSON (finsler: true)")->required();
  sf->add_option("--op", fo.op, "spray | berwald | cartan | predicates")
      ->check(CLI::IsMember({"spray", "berwald", "cartan", "predicates"}));
  sf->add_option("--samples", fo.samples, "sample count");
  sf->add_option("--tol", fo.tol, "threshold for --assert");
  sf->add_flag("--assert", fo.assert_, "exit 3 when the op's check fails at --tol");
  sf->add_option("--seed", fo.seed, "sampling seed");
  add_emit_flags(sf, fo.emit);

  OracleDiffOpts oo;
  auto* sd = app.add_subcommand("oracle-diff",
                                "structured block evaluators vs the coordinate oracle");
  sd->add_option("spec", oo.spec, "chart spec JSON; omit for a randomized sweep");
  sd->add_option("--connection", oo.connection, "lc | ss")
      ->check(CLI::IsMember({"lc", "ss"}));
  sd->add_option("--specs", oo.specs, "random spec count for the sweep");
  sd->add_option("--points", oo.points, "evaluation points per spec");
  sd->add_option("--tol", oo.tol, "relative tolerance");
  sd->add_option("--tol-abs", oo.tol_abs, "absolute tolerance near zero");
  sd->add_flag("--assert", oo.assert_, "exit 3 when any clause disagrees");
  sd->add_option("--seed", oo.seed, "sweep seed");
  add_emit_flags(sd, oo.emit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sv) return cmd_validate(vo, cmdline);
    if (*sc) return cmd_curvature(co, cmdline);
    if (*sr) return cmd_ricci(ro, cmdline);
    if (*ss) return cmd_scalar(so, cmdline);
    if (*sg) return cmd_geodesic(go, cmdline);
    if (*si) return cmd_index_form(io, cmdline);
    if (*sk) return cmd_killing(ko, cmdline);
    if (*se) return cmd_einstein(eo, cmdline);
    if (*sq) return cmd_scalar_solve(qo, cmdline);
    if (*sf) return cmd_finsler(fo, cmdline);
    if (*sd) return cmd_oracle_diff(oo, cmdline);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "twistgeo: " << e.what() << "\n";
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "twistgeo: " << e.what() << "\n";
    return kValidation;
  } catch (const std::runtime_error& e) {
    std::cerr << "twistgeo: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "twistgeo: internal error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}
