// Stent description file (structured text, one JSON document), load
// specifications, and deterministic result export.
#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stentnet/core.hpp"
#include "stentnet/fem.hpp"
#include "stentnet/graph.hpp"

namespace stentnet {

/// Per-edge force density from the input file: constant vector, polynomial in
/// the arc length, or piecewise-linear samples.
class LoadSpec {
 public:
  enum class Kind { Zero, Constant, Polynomial, Sampled };

  static LoadSpec zero() { return LoadSpec(); }

  static LoadSpec constant(const Vec3& value) {
    LoadSpec l;
    l.kind_ = Kind::Constant;
    l.coeffs_ = {value};
    return l;
  }

  /// f(s) = sum_k coeffs[k] s^k
  static LoadSpec polynomial(std::vector<Vec3> coeffs) {
    LoadSpec l;
    l.kind_ = Kind::Polynomial;
    l.coeffs_ = std::move(coeffs);
    return l;
  }

  static LoadSpec sampled(std::vector<double> s, std::vector<Vec3> values) {
    if (s.size() != values.size() || s.size() < 2)
      throw ValidationError("sampled load needs matching s/value lists of length >= 2");
    for (std::size_t k = 1; k < s.size(); ++k)
      if (!(s[k] > s[k - 1])) throw ValidationError("sampled load abscissae must increase");
    LoadSpec l;
    l.kind_ = Kind::Sampled;
    l.samples_s_ = std::move(s);
    l.coeffs_ = std::move(values);
    return l;
  }

  Kind kind() const { return kind_; }
  const std::vector<Vec3>& coefficients() const { return coeffs_; }
  const std::vector<double>& sample_abscissae() const { return samples_s_; }

  Vec3 operator()(double s) const {
    switch (kind_) {
      case Kind::Zero:
        return Vec3::Zero();
      case Kind::Constant:
        return coeffs_[0];
      case Kind::Polynomial: {
        Vec3 acc = Vec3::Zero();
        double p = 1.0;
        for (const auto& c : coeffs_) {
          acc += p * c;
          p *= s;
        }
        return acc;
      }
      case Kind::Sampled: {
        if (s <= samples_s_.front()) return coeffs_.front();
        if (s >= samples_s_.back()) return coeffs_.back();
        auto it = std::upper_bound(samples_s_.begin(), samples_s_.end(), s);
        std::size_t k = static_cast<std::size_t>(it - samples_s_.begin());
        double w = (s - samples_s_[k - 1]) / (samples_s_[k] - samples_s_[k - 1]);
        return (1.0 - w) * coeffs_[k - 1] + w * coeffs_[k];
      }
    }
    return Vec3::Zero();
  }

 private:
  Kind kind_ = Kind::Zero;
  std::vector<Vec3> coeffs_;
  std::vector<double> samples_s_;
};

struct LoadedStent {
  StentGraph graph;
  std::vector<LoadSpec> loads;

  LoadFunction load_function() const {
    std::vector<LoadSpec> ls = loads;
    return [ls](int edge, double s) { return ls[edge](s); };
  }
};

namespace detail {

inline double finite_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(where + ": value is not finite");
  return v;
}

inline Vec3 vec3_of(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected [x, y, z]");
  return Vec3(finite_number(j[0], where), finite_number(j[1], where),
              finite_number(j[2], where));
}

inline nlohmann::json vec3_json(const Vec3& v) {
  return nlohmann::json::array({v.x(), v.y(), v.z()});
}

}  // namespace detail

/// Parses a stent description document. Throws ParseError on malformed input
/// and ValidationError on violated model invariants (with the offending edge
/// named in the message).
inline LoadedStent parse_stent(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("stent file: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("stent file: top level must be an object");
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != 1)
    throw ParseError("stent file: missing or unsupported version (expected 1)");
  if (!doc.contains("vertices") || !doc["vertices"].is_array() ||
      !doc.contains("edges") || !doc["edges"].is_array())
    throw ParseError("stent file: needs vertices[] and edges[]");

  std::map<long, int> vertex_index;
  std::vector<Vec3> vertices;
  for (const auto& jv : doc["vertices"]) {
    if (!jv.contains("id") || !jv.contains("position"))
      throw ParseError("vertex: needs id and position");
    long id = jv["id"].get<long>();
    if (vertex_index.count(id))
      throw ValidationError("duplicate vertex id " + std::to_string(id));
    vertex_index[id] = static_cast<int>(vertices.size());
    vertices.push_back(detail::vec3_of(jv["position"], "vertex " + std::to_string(id)));
  }

  std::vector<StentEdge> edges;
  std::vector<LoadSpec> loads;
  std::map<long, int> edge_ids;
  for (const auto& je : doc["edges"]) {
    if (!je.contains("id") || !je.contains("tail") || !je.contains("head") ||
        !je.contains("curve"))
      throw ParseError("edge: needs id, tail, head, curve");
    long id = je["id"].get<long>();
    std::string tag = "edge " + std::to_string(id);
    if (edge_ids.count(id)) throw ValidationError("duplicate " + tag + " id");
    edge_ids[id] = static_cast<int>(edges.size());
    long tail_id = je["tail"].get<long>(), head_id = je["head"].get<long>();
    if (!vertex_index.count(tail_id) || !vertex_index.count(head_id))
      throw ValidationError(tag + ": tail/head references a missing vertex id");
    int tail = vertex_index.at(tail_id), head = vertex_index.at(head_id);
    const Vec3& ptail = vertices[tail];
    const Vec3& phead = vertices[head];

    const auto& jc = je["curve"];
    if (!jc.contains("kind")) throw ParseError(tag + ": curve needs a kind");
    std::string kind = jc["kind"].get<std::string>();
    ParamCurve curve = ParamCurve::straight(Vec3::Zero(), Vec3::UnitX());
    try {
      if (kind == "straight") {
        curve = ParamCurve::straight(ptail, phead);
      } else if (kind == "arc") {
        if (!jc.contains("center") || !jc.contains("axis") || !jc.contains("sweep"))
          throw ParseError(tag + ": arc needs center, axis, sweep");
        curve = ParamCurve::arc(detail::vec3_of(jc["center"], tag + " center"),
                                detail::vec3_of(jc["axis"], tag + " axis"), ptail,
                                detail::finite_number(jc["sweep"], tag + " sweep"));
      } else if (kind == "polyline") {
        if (!jc.contains("points") || !jc["points"].is_array())
          throw ParseError(tag + ": polyline needs points[]");
        std::vector<Vec3> pts;
        for (const auto& jp : jc["points"])
          pts.push_back(detail::vec3_of(jp, tag + " point"));
        curve = ParamCurve::polyline(std::move(pts));
      } else {
        throw ParseError(tag + ": unknown curve kind '" + kind + "'");
      }
    } catch (const ValidationError& e) {
      throw ValidationError(tag + ": " + e.what());
    }
    double d0 = (curve.point(0.0) - ptail).norm();
    double d1 = (curve.point(curve.length()) - phead).norm();
    if (std::max(d0, d1) > 1e-9) {
      std::ostringstream msg;
      msg << tag << ": curve endpoint is " << std::max(d0, d1)
          << " away from the declared vertex (tolerance 1e-9)";
      throw ValidationError(msg.str());
    }

    RodProperties props = RodProperties::from_matrix(Mat3::Identity());
    try {
      if (je.contains("H")) {
        const auto& jh = je["H"];
        if (!jh.is_array() || jh.size() != 3) throw ParseError(tag + ": H must be 3x3");
        Mat3 h;
        for (int r = 0; r < 3; ++r) {
          if (!jh[r].is_array() || jh[r].size() != 3)
            throw ParseError(tag + ": H must be 3x3");
          for (int c = 0; c < 3; ++c)
            h(r, c) = detail::finite_number(jh[r][c], tag + " H");
        }
        props = RodProperties::from_matrix(h);
      } else if (je.contains("material") && je.contains("cross_section")) {
        Material mat{detail::finite_number(je["material"]["mu"], tag + " mu"),
                     detail::finite_number(je["material"]["lambda"], tag + " lambda")};
        CrossSection cs{detail::finite_number(je["cross_section"]["width"], tag + " width"),
                        detail::finite_number(je["cross_section"]["thickness"],
                                              tag + " thickness")};
        props = RodProperties::from_material(mat, cs);
      } else {
        throw ParseError(tag + ": needs material + cross_section, or an H override");
      }
    } catch (const ValidationError& e) {
      throw ValidationError(tag + ": " + e.what());
    }

    LoadSpec load = LoadSpec::zero();
    if (je.contains("load")) {
      const auto& jl = je["load"];
      std::string type = jl.value("type", "");
      if (type == "constant") {
        load = LoadSpec::constant(detail::vec3_of(jl["value"], tag + " load"));
      } else if (type == "polynomial") {
        std::vector<Vec3> cs;
        for (const auto& jc2 : jl["coefficients"])
          cs.push_back(detail::vec3_of(jc2, tag + " load coefficient"));
        load = LoadSpec::polynomial(std::move(cs));
      } else if (type == "sampled") {
        std::vector<double> ss;
        std::vector<Vec3> vs;
        for (const auto& j2 : jl["s"]) ss.push_back(detail::finite_number(j2, tag + " load s"));
        for (const auto& j2 : jl["values"]) vs.push_back(detail::vec3_of(j2, tag + " load value"));
        load = LoadSpec::sampled(std::move(ss), std::move(vs));
      } else {
        throw ParseError(tag + ": unknown load type '" + type + "'");
      }
    }

    edges.push_back(StentEdge{tail, head, curve, props});
    loads.push_back(load);
  }

  return LoadedStent{StentGraph(std::move(vertices), std::move(edges)), std::move(loads)};
}

inline LoadedStent load_stent(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open stent file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_stent(buf.str());
}

inline nlohmann::json stent_to_json(const StentGraph& g, const std::vector<LoadSpec>& loads) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["vertices"] = nlohmann::json::array();
  for (int j = 0; j < g.n_vertices(); ++j)
    doc["vertices"].push_back(
        {{"id", j}, {"position", detail::vec3_json(g.vertex(j))}});
  doc["edges"] = nlohmann::json::array();
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& e = g.edge(i);
    nlohmann::json je{{"id", i}, {"tail", e.tail}, {"head", e.head}};
    switch (e.curve.kind()) {
      case CurveKind::Straight:
        je["curve"] = {{"kind", "straight"}};
        break;
      case CurveKind::Arc:
        je["curve"] = {{"kind", "arc"},
                       {"center", detail::vec3_json(e.curve.arc_center())},
                       {"axis", detail::vec3_json(e.curve.arc_axis())},
                       {"sweep", e.curve.arc_sweep()}};
        break;
      case CurveKind::Polyline: {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : e.curve.polyline_points()) pts.push_back(detail::vec3_json(p));
        je["curve"] = {{"kind", "polyline"}, {"points", pts}};
        break;
      }
    }
    if (e.properties.has_override()) {
      const Mat3& h = e.properties.elasticity_matrix();
      je["H"] = {{h(0, 0), h(0, 1), h(0, 2)},
                 {h(1, 0), h(1, 1), h(1, 2)},
                 {h(2, 0), h(2, 1), h(2, 2)}};
    } else {
      je["material"] = {{"mu", e.properties.material().mu},
                        {"lambda", e.properties.material().lambda}};
      je["cross_section"] = {{"width", e.properties.cross_section().width},
                             {"thickness", e.properties.cross_section().thickness}};
    }
    if (i < static_cast<int>(loads.size())) {
      const auto& l = loads[i];
      switch (l.kind()) {
        case LoadSpec::Kind::Zero:
          break;
        case LoadSpec::Kind::Constant:
          je["load"] = {{"type", "constant"},
                        {"value", detail::vec3_json(l.coefficients()[0])}};
          break;
        case LoadSpec::Kind::Polynomial: {
          nlohmann::json cs = nlohmann::json::array();
          for (const auto& c : l.coefficients()) cs.push_back(detail::vec3_json(c));
          je["load"] = {{"type", "polynomial"}, {"coefficients", cs}};
          break;
        }
        case LoadSpec::Kind::Sampled: {
          nlohmann::json ss = nlohmann::json::array(), vs = nlohmann::json::array();
          for (double s : l.sample_abscissae()) ss.push_back(s);
          for (const auto& c : l.coefficients()) vs.push_back(detail::vec3_json(c));
          je["load"] = {{"type", "sampled"}, {"s", ss}, {"values", vs}};
          break;
        }
      }
    }
    doc["edges"].push_back(je);
  }
  return doc;
}

inline std::string write_stent(const StentGraph& g, const std::vector<LoadSpec>& loads = {}) {
  return stent_to_json(g, loads).dump(1);
}

/// Writes content to a temporary file in the target directory, then renames
/// it over the destination.
inline void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline void save_stent(const std::string& path, const StentGraph& g,
                       const std::vector<LoadSpec>& loads = {}) {
  atomic_write(path, write_stent(g, loads) + "\n");
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Tabular export of a solved state: one row per sample, columns
/// edge_id, s, y1..y3, theta1..theta3, n1..n3. Deterministic formatting.
inline void write_result_table(const std::string& path, const StentGraph& g, const Mesh& mesh,
                               const StentState& state, int samples_per_element = 20) {
  std::ostringstream out;
  out << "# edge_id\ts\ty1\ty2\ty3\ttheta1\ttheta2\ttheta3\tn1\tn2\tn3\n";
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& breaks = mesh.breakpoints(i);
    for (int e = 0; e < mesh.elements(i); ++e) {
      for (int k = 0; k < samples_per_element; ++k) {
        double s = breaks[e] +
                   (breaks[e + 1] - breaks[e]) * k / (samples_per_element - 1);
        Vec3 y = state.y(i, s), th = state.theta(i, s), n = state.n(i, s);
        out << i << '\t' << format_g17(s);
        for (int c = 0; c < 3; ++c) out << '\t' << format_g17(y(c));
        for (int c = 0; c < 3; ++c) out << '\t' << format_g17(th(c));
        for (int c = 0; c < 3; ++c) out << '\t' << format_g17(n(c));
        out << '\n';
      }
    }
  }
  atomic_write(path, out.str());
}

inline void write_summary(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << ' ' << v << '\n';
  atomic_write(path, out.str());
}

}  // namespace stentnet
