#pragma once
// JSON spec files. A metric chart document carries base/fibers/warps/torsion
// and a sampling box; a norm-product document is marked "finsler": true and
// carries per-factor norm expressions with twists. Coordinate names may be
// given explicitly; otherwise the defaults below apply and expression strings
// must be written against them.
//
// Default coordinates, metric charts: base t, s, u, v, w (then b6, b7, ...);
// fiber 1 x, y, z; fiber 2 p, q, r; fiber 3 h, k, m; later fibers f4c1, ...
// Default coordinates, norm products: factor named N gets positions
// Nx1..Nxd and directions Ny1..Nyd.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "twistgeo/chart.hpp"
#include "twistgeo/finsler.hpp"

namespace twistgeo {

struct SpecIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> default_base_coords(int dim) {
  static const char* names[] = {"t", "s", "u", "v", "w"};
  std::vector<std::string> out;
  for (int i = 0; i < dim; ++i)
    out.push_back(i < 5 ? names[i] : "b" + std::to_string(i + 1));
  return out;
}

inline std::vector<std::string> default_fiber_coords(int fiber, int dim) {
  static const char* names[3][3] = {{"x", "y", "z"}, {"p", "q", "r"}, {"h", "k", "m"}};
  std::vector<std::string> out;
  for (int i = 0; i < dim; ++i) {
    if (fiber < 3 && i < 3)
      out.push_back(names[fiber][i]);
    else
      out.push_back("f" + std::to_string(fiber + 1) + "c" + std::to_string(i + 1));
  }
  return out;
}

namespace detail {

inline const nlohmann::json& need(const nlohmann::json& j, const std::string& key,
                                  const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw SpecIoError(where + ": missing key \"" + key + "\"");
  return *it;
}

inline std::vector<std::string> coord_list(const nlohmann::json& j, const std::string& key,
                                           int dim, const std::string& where,
                                           std::vector<std::string> fallback) {
  if (!j.contains(key)) return fallback;
  std::vector<std::string> out = j.at(key).get<std::vector<std::string>>();
  if (static_cast<int>(out.size()) != dim)
    throw SpecIoError(where + ": \"" + key + "\" must list " + std::to_string(dim) + " names");
  return out;
}

inline std::vector<Expr> metric_entries(const nlohmann::json& rows,
                                        const std::vector<std::string>& coords,
                                        const std::string& where) {
  int dim = static_cast<int>(coords.size());
  if (!rows.is_array() || static_cast<int>(rows.size()) != dim)
    throw SpecIoError(where + ": \"metric\" must be " + std::to_string(dim) + " rows");
  std::vector<Expr> out;
  for (int i = 0; i < dim; ++i) {
    const auto& row = rows[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw SpecIoError(where + ": metric row " + std::to_string(i) + " must have " +
                        std::to_string(dim) + " entries");
    for (int j = 0; j < dim; ++j) {
      try {
        out.push_back(Expr::parse(row[static_cast<size_t>(j)].get<std::string>(), coords));
      } catch (const ParseError& e) {
        throw SpecIoError(where + ": metric entry (" + std::to_string(i) + "," +
                          std::to_string(j) + "): " + e.what());
      }
    }
  }
  return out;
}

inline Eigen::MatrixX2d box_from_json(const nlohmann::json& j, int rows,
                                      const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw SpecIoError(where + ": box must list " + std::to_string(rows) + " [lo, hi] pairs");
  Eigen::MatrixX2d box(rows, 2);
  for (int i = 0; i < rows; ++i) {
    const auto& pair = j[static_cast<size_t>(i)];
    if (!pair.is_array() || pair.size() != 2)
      throw SpecIoError(where + ": box row " + std::to_string(i) + " must be [lo, hi]");
    box(i, 0) = pair[0].get<double>();
    box(i, 1) = pair[1].get<double>();
    if (!(box(i, 0) < box(i, 1)))
      throw SpecIoError(where + ": box row " + std::to_string(i) + " needs lo < hi");
  }
  return box;
}

inline nlohmann::json box_to_json(const Eigen::MatrixX2d& box) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < box.rows(); ++i)
    j.push_back(nlohmann::json::array({box(i, 0), box(i, 1)}));
  return j;
}

inline nlohmann::json metric_to_json(const std::vector<Expr>& entries, int dim) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < dim; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < dim; ++j) row.push_back(entries[static_cast<size_t>(i * dim + j)].source());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace detail

inline bool is_finsler_json(const nlohmann::json& j) { return j.value("finsler", false); }

// -- metric charts ------------------------------------------------------------

inline ProductSpec product_spec_from_json(const nlohmann::json& j) {
  ProductSpec s;
  const auto& jb = detail::need(j, "base", "spec");
  s.base.dim = detail::need(jb, "dim", "base").get<int>();
  if (s.base.dim < 1) throw SpecIoError("base: dim must be positive");
  s.base.coords =
      detail::coord_list(jb, "coords", s.base.dim, "base", default_base_coords(s.base.dim));
  s.base.metric = detail::metric_entries(detail::need(jb, "metric", "base"), s.base.coords, "base");
  s.base.signature = detail::need(jb, "signature", "base").get<std::vector<int>>();
  if (static_cast<int>(s.base.signature.size()) != s.base.dim)
    throw SpecIoError("base: signature must list dim entries");
  for (int e : s.base.signature)
    if (e != 1 && e != -1) throw SpecIoError("base: signature entries must be +1 or -1");

  if (j.contains("fibers")) {
    int idx = 0;
    for (const auto& jf : j.at("fibers")) {
      FiberSpec f;
      std::string where = "fiber " + std::to_string(idx + 1);
      f.name = jf.value("name", "F" + std::to_string(idx + 1));
      f.dim = detail::need(jf, "dim", where).get<int>();
      if (f.dim < 1) throw SpecIoError(where + ": dim must be positive");
      f.coords = detail::coord_list(jf, "coords", f.dim, where, default_fiber_coords(idx, f.dim));
      f.metric = detail::metric_entries(detail::need(jf, "metric", where), f.coords, where);
      s.fibers.push_back(std::move(f));
      ++idx;
    }
  }

  const auto& jw = detail::need(j, "warps", "spec");
  if (!jw.is_array() || jw.size() != s.fibers.size())
    throw SpecIoError("spec: \"warps\" must list one expression per fiber");
  for (size_t i = 0; i < s.fibers.size(); ++i) {
    std::vector<std::string> scope = s.base.coords;
    const auto& fc = s.fibers[i].coords;
    scope.insert(scope.end(), fc.begin(), fc.end());
    WarpFn w;
    try {
      w.expr = Expr::parse(jw[i].get<std::string>(), scope);
    } catch (const ParseError& e) {
      throw SpecIoError("warp " + std::to_string(i + 1) + ": " + e.what());
    }
    s.warps.push_back(std::move(w));
  }

  if (j.contains("torsion") && !j.at("torsion").is_null()) {
    const auto& jt = j.at("torsion");
    std::string loc = jt.value("location", "none");
    if (loc == "none") {
      s.torsion.loc = TorsionLoc::None;
    } else {
      std::vector<std::string> carrier;
      if (loc == "base") {
        s.torsion.loc = TorsionLoc::Base;
        carrier = s.base.coords;
      } else if (loc == "fiber") {
        s.torsion.loc = TorsionLoc::Fiber;
        int r = detail::need(jt, "fiber", "torsion").get<int>();  // 1-based in spec files
        if (r < 1 || r > static_cast<int>(s.fibers.size()))
          throw SpecIoError("torsion: fiber index out of range");
        s.torsion.fiber = r - 1;
        carrier = s.fibers[static_cast<size_t>(r - 1)].coords;
      } else {
        throw SpecIoError("torsion: location must be none, base, or fiber");
      }
      const auto& jc = detail::need(jt, "components", "torsion");
      if (!jc.is_array() || jc.size() != carrier.size())
        throw SpecIoError("torsion: components must list one expression per carrier coordinate");
      for (const auto& c : jc) {
        try {
          s.torsion.components.push_back(Expr::parse(c.get<std::string>(), carrier));
        } catch (const ParseError& e) {
          throw SpecIoError(std::string("torsion component: ") + e.what());
        }
      }
    }
  }

  s.domain_box = detail::box_from_json(detail::need(j, "domain_box", "spec"), s.total_dim(),
                                       "domain_box");

  if (j.contains("fields")) {
    std::vector<std::string> all = s.base.coords;
    for (const auto& f : s.fibers) all.insert(all.end(), f.coords.begin(), f.coords.end());
    for (const auto& jf : j.at("fields")) {
      VectorFieldSpec v;
      v.name = detail::need(jf, "name", "field").get<std::string>();
      const auto& jc = detail::need(jf, "components", "field " + v.name);
      if (!jc.is_array() || static_cast<int>(jc.size()) != s.total_dim())
        throw SpecIoError("field " + v.name + ": components must list one expression per coordinate");
      for (const auto& c : jc) {
        try {
          v.components.push_back(Expr::parse(c.get<std::string>(), all));
        } catch (const ParseError& e) {
          throw SpecIoError("field " + v.name + ": " + e.what());
        }
      }
      s.fields.push_back(std::move(v));
    }
  }
  return s;
}

inline nlohmann::json product_spec_to_json(const ProductSpec& s) {
  nlohmann::json j;
  j["base"]["dim"] = s.base.dim;
  j["base"]["coords"] = s.base.coords;
  j["base"]["metric"] = detail::metric_to_json(s.base.metric, s.base.dim);
  j["base"]["signature"] = s.base.signature;
  j["fibers"] = nlohmann::json::array();
  for (const auto& f : s.fibers) {
    nlohmann::json jf;
    jf["name"] = f.name;
    jf["dim"] = f.dim;
    jf["coords"] = f.coords;
    jf["metric"] = detail::metric_to_json(f.metric, f.dim);
    j["fibers"].push_back(jf);
  }
  j["warps"] = nlohmann::json::array();
  for (const auto& w : s.warps) j["warps"].push_back(w.expr.source());
  if (s.torsion.loc == TorsionLoc::None) {
    j["torsion"]["location"] = "none";
  } else {
    j["torsion"]["location"] = s.torsion.loc == TorsionLoc::Base ? "base" : "fiber";
    if (s.torsion.loc == TorsionLoc::Fiber) j["torsion"]["fiber"] = s.torsion.fiber + 1;
    j["torsion"]["components"] = nlohmann::json::array();
    for (const auto& c : s.torsion.components) j["torsion"]["components"].push_back(c.source());
  }
  j["domain_box"] = detail::box_to_json(s.domain_box);
  if (!s.fields.empty()) {
    j["fields"] = nlohmann::json::array();
    for (const auto& f : s.fields) {
      nlohmann::json jf;
      jf["name"] = f.name;
      jf["components"] = nlohmann::json::array();
      for (const auto& c : f.components) jf["components"].push_back(c.source());
      j["fields"].push_back(jf);
    }
  }
  return j;
}

// -- norm products ------------------------------------------------------------

namespace detail {

inline FinslerFactor finsler_factor_from_json(const nlohmann::json& jf, const std::string& fallback_name) {
  std::string name = jf.value("name", fallback_name);
  std::string where = "factor " + name;
  int dim = need(jf, "dim", where).get<int>();
  if (dim < 1) throw SpecIoError(where + ": dim must be positive");
  std::vector<std::string> xdef, ydef;
  for (int a = 1; a <= dim; ++a) {
    xdef.push_back(name + "x" + std::to_string(a));
    ydef.push_back(name + "y" + std::to_string(a));
  }
  auto xc = coord_list(jf, "xcoords", dim, where, xdef);
  auto yc = coord_list(jf, "ycoords", dim, where, ydef);
  Eigen::MatrixX2d xbox;
  if (jf.contains("xbox")) {
    xbox = box_from_json(jf.at("xbox"), dim, where + " xbox");
  } else {
    xbox.resize(dim, 2);
    for (int a = 0; a < dim; ++a) {
      xbox(a, 0) = -1.0;
      xbox(a, 1) = 1.0;
    }
  }
  FinslerFactor f;
  try {
    f = finsler_factor(name, xc, yc, need(jf, "F", where).get<std::string>(), xbox);
  } catch (const ParseError& e) {
    throw SpecIoError(where + ": " + e.what());
  }
  if (jf.contains("yband")) {
    const auto& b = jf.at("yband");
    if (!b.is_array() || b.size() != 2) throw SpecIoError(where + ": yband must be [lo, hi]");
    f.ylo = b[0].get<double>();
    f.yhi = b[1].get<double>();
    if (!(0.0 < f.ylo && f.ylo < f.yhi)) throw SpecIoError(where + ": need 0 < lo < hi in yband");
  }
  return f;
}

inline nlohmann::json finsler_factor_to_json(const FinslerFactor& f) {
  nlohmann::json j;
  j["name"] = f.name;
  j["dim"] = f.dim;
  j["xcoords"] = f.xcoords;
  j["ycoords"] = f.ycoords;
  j["F"] = f.F.source();
  j["xbox"] = box_to_json(f.xbox);
  j["yband"] = nlohmann::json::array({f.ylo, f.yhi});
  return j;
}

}  // namespace detail

inline ProductFinslerSpec finsler_spec_from_json(const nlohmann::json& j) {
  if (!is_finsler_json(j)) throw SpecIoError("spec: expected \"finsler\": true");
  FinslerFactor base = detail::finsler_factor_from_json(detail::need(j, "base", "spec"), "b");
  std::vector<FinslerFactor> fibers;
  if (j.contains("fibers")) {
    int idx = 0;
    for (const auto& jf : j.at("fibers"))
      fibers.push_back(detail::finsler_factor_from_json(jf, "f" + std::to_string(++idx)));
  }
  std::vector<std::string> twists;
  if (j.contains("twists"))
    twists = j.at("twists").get<std::vector<std::string>>();
  if (twists.size() != fibers.size())
    throw SpecIoError("spec: \"twists\" must list one expression per fiber");
  try {
    return finsler_product(j.value("name", "finsler_product"), std::move(base), std::move(fibers),
                           twists);
  } catch (const ParseError& e) {
    throw SpecIoError(std::string("twist: ") + e.what());
  }
}

inline nlohmann::json finsler_spec_to_json(const ProductFinslerSpec& ps) {
  nlohmann::json j;
  j["finsler"] = true;
  j["name"] = ps.name;
  j["base"] = detail::finsler_factor_to_json(ps.base);
  j["fibers"] = nlohmann::json::array();
  for (const auto& f : ps.fibers) j["fibers"].push_back(detail::finsler_factor_to_json(f));
  j["twists"] = nlohmann::json::array();
  for (const auto& t : ps.twists) j["twists"].push_back(t.source());
  return j;
}

// -- files ----------------------------------------------------------------------

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecIoError("cannot open spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SpecIoError(path + ": " + e.what());
  }
  return j;
}

inline ProductSpec load_product_spec(const std::string& path) {
  return product_spec_from_json(load_json(path));
}

inline ProductFinslerSpec load_finsler_spec(const std::string& path) {
  return finsler_spec_from_json(load_json(path));
}

}  // namespace twistgeo
