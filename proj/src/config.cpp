#include "gibbsflow/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

#include "gibbsflow/errors.hpp"

namespace gf {

namespace {

enum class Kind { Real, Int, RealList, String, Expression, Bool, Choice };

struct ParamSpec {
  Kind kind;
  json fallback;
  double lo = -HUGE_VAL, hi = HUGE_VAL;  // closed range; for lists, per entry
  bool open_lo = false;                  // lo excluded
  std::vector<std::string> choices = {};
};

using Table = std::map<std::string, ParamSpec>;

json powers_of_two(int lo, int hi) {
  json out = json::array();
  for (int k = lo; k <= hi; ++k) out.push_back(std::ldexp(1.0, k));
  return out;
}

const std::map<std::string, Table>& tables() {
  static const std::map<std::string, Table> t = {
      {"validate", {{"grid_points", {Kind::Int, 2048, 16, 1 << 20}}}},
      {"eigen",
       {{"sigma", {Kind::Real, 0.0, -50, 50}},
        {"tol", {Kind::Real, 1e-12, 0, 1e-3, true}},
        {"resolution_check", {Kind::Bool, true}}}},
      {"gibbs-audit", {{"sigma", {Kind::Real, 0.0, -50, 50}}, {"depth", {Kind::Int, 8, 1, 20}}}},
      {"partition",
       {{"b", {Kind::RealList, powers_of_two(7, 12), 0, HUGE_VAL, true}},
        {"Delta", {Kind::Real, 1.0, 0, 1e6, true}},
        {"delta", {Kind::Real, 0.5, 0, 1e6, true}},
        {"K", {Kind::Real, -1.0, -1, 1e6}}}},  // -1: use C0
      {"uni",
       {{"depth", {Kind::Int, 8, 1, 14}},
        {"y_grid", {Kind::Int, 512, 8, 1 << 16}},
        {"max_midpoints", {Kind::Int, 1024, 0, 1 << 20}},
        {"uni_depth", {Kind::Int, 4, 1, 12}},
        {"R", {Kind::Real, 0.05, 0, 1, true}}}},
      {"transversality",
       {{"depth", {Kind::Int, 4, 1, 12}},
        {"R", {Kind::Real, 0.05, 0, 1, true}},
        {"delta", {Kind::Real, 0.05, 0, 1, true}},
        {"b", {Kind::Real, 1024.0, 1, 1e8}},
        {"beta", {Kind::Real, 1.0, 0, 10, true}}}},
      {"cohomology", {{"truncation", {Kind::Int, 40, 1, 60}}, {"tol", {Kind::Real, 1e-6, 0, 1, true}}}},
      {"cancellation",
       {{"b", {Kind::RealList, json::array({256.0, 1024.0}), 1, 1e6}},
        {"delta", {Kind::Real, 0.05, 0, 1, true}},
        {"beta", {Kind::Real, 1.0, 0, 10, true}},
        {"iterations", {Kind::Int, 10, 1, 100}},
        {"nodes_per_b", {Kind::Real, 240.0, 1, 1e4}},
        {"c0_variant", {Kind::Choice, "printed", 0, 0, false, {"printed", "divided"}}}}},
      {"contraction",
       {{"sigma", {Kind::Real, 0.0, -50, 50}},
        {"b", {Kind::RealList, powers_of_two(8, 12), 1, 1e6}},
        {"beta", {Kind::Real, 1.0, 0, 10, true}},
        {"delta", {Kind::Real, 0.05, 0, 1, true}},
        {"family", {Kind::Int, 12, 0, 1000}},
        {"nodes_per_b", {Kind::Real, 64.0, 1, 1e4}},
        {"norm_sweep", {Kind::Bool, false}},
        {"B", {Kind::Real, 2.0, 0, 100, true}},
        {"sweep_functions", {Kind::Int, 200, 0, 100000}}}},
      {"correlate",
       {{"sigma", {Kind::Real, 0.0, -50, 50}},
        {"samples", {Kind::Int, 1000000, 64, 1e9}},
        {"t_max", {Kind::Real, 40.0, 0, 1e4, true}},
        {"dt", {Kind::Real, 0.25, 0, 1e3, true}},
        {"v", {Kind::Expression, "cos(2*pi*u) + x"}},
        {"w", {Kind::Expression, "cos(2*pi*u) + x"}},
        {"batches", {Kind::Int, 32, 2, 4096}},
        {"thin", {Kind::Int, 10, 1, 10000}},
        {"burn_in", {Kind::Int, 1000, 0, 1e7}}}},
  };
  return t;
}

[[noreturn]] void fail(const std::string& what, const std::string& ptr) { throw ConfigError(what, ptr); }

std::string range_text(const ParamSpec& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s%g, %g]", p.open_lo ? "(" : "[", p.lo, p.hi);
  return buf;
}

void check_real(double v, const ParamSpec& p, const std::string& ptr) {
  bool ok = std::isfinite(v) && (p.open_lo ? v > p.lo : v >= p.lo) && v <= p.hi;
  if (!ok) fail("value " + json(v).dump() + " outside " + range_text(p), ptr);
}

json check_param(const json& v, const ParamSpec& p, const std::string& ptr) {
  switch (p.kind) {
    case Kind::Real:
      if (!v.is_number()) fail("expected a number", ptr);
      check_real(v.get<double>(), p, ptr);
      return v.get<double>();
    case Kind::Int: {
      if (!v.is_number_integer()) fail("expected an integer", ptr);
      check_real(static_cast<double>(v.get<long long>()), p, ptr);
      return v.get<long long>();
    }
    case Kind::RealList: {
      json list = v.is_array() ? v : json::array({v});
      if (list.empty()) fail("expected a non-empty list", ptr);
      json out = json::array();
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string at = v.is_array() ? ptr + "/" + std::to_string(i) : ptr;
        if (!list[i].is_number()) fail("expected a number", at);
        check_real(std::abs(list[i].get<double>()), p, at);
        out.push_back(list[i].get<double>());
      }
      return out;
    }
    case Kind::String:
      if (!v.is_string()) fail("expected a string", ptr);
      return v;
    case Kind::Choice: {
      if (!v.is_string()) fail("expected a string", ptr);
      for (const auto& c : p.choices)
        if (v.get<std::string>() == c) return v;
      std::string all;
      for (const auto& c : p.choices) all += (all.empty() ? "" : ", ") + c;
      fail("expected one of: " + all, ptr);
    }
    case Kind::Expression:
      if (!v.is_string()) fail("expected an expression string", ptr);
      try {
        parse(v.get<std::string>());
      } catch (const Error& e) {
        fail(e.what(), ptr);
      }
      return v;
    case Kind::Bool:
      if (!v.is_boolean()) fail("expected true or false", ptr);
      return v;
  }
  return v;
}

json expression_list(const json& j, const std::string& ptr) {
  if (j.is_string()) return json::array({j});
  if (!j.is_array() || j.empty()) fail("expected an expression or a list of expressions", ptr);
  for (std::size_t i = 0; i < j.size(); ++i)
    if (!j[i].is_string()) fail("expected an expression string", ptr + "/" + std::to_string(i));
  return j;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"validate",       "eigen",      "gibbs-audit",  "partition",
                                                 "uni",            "transversality", "cohomology", "cancellation",
                                                 "contraction",    "correlate"};
  return names;
}

SystemSpec system_from_json(const json& j, const std::string& ptr) {
  if (!j.is_object()) fail("system must be an object", ptr);
  static const std::vector<std::string> keys = {"name", "partition", "branches", "roof", "potential", "alpha"};
  for (const auto& [k, _] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail("unknown key '" + k + "'", ptr + "/" + k);
  for (const char* k : {"partition", "branches", "roof"})
    if (!j.contains(k)) fail(std::string("missing key '") + k + "'", ptr);
  SystemSpec s;
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail("expected a string", ptr + "/name");
    s.name = j["name"];
  }
  const auto& part = j["partition"];
  if (!part.is_array() || part.size() < 2) fail("expected at least two partition points", ptr + "/partition");
  for (std::size_t i = 0; i < part.size(); ++i) {
    if (!part[i].is_number()) fail("expected a number", ptr + "/partition/" + std::to_string(i));
    s.partition.push_back(part[i]);
  }
  const auto& br = j["branches"];
  if (!br.is_array() || br.size() + 1 != part.size())
    fail("expected one branch per partition element", ptr + "/branches");
  for (std::size_t i = 0; i < br.size(); ++i) {
    const std::string at = ptr + "/branches/" + std::to_string(i);
    if (!br[i].is_object()) fail("expected {\"expr\": ..., \"image\": [lo, hi]}", at);
    for (const auto& [k, _] : br[i].items())
      if (k != "expr" && k != "image") fail("unknown key '" + k + "'", at + "/" + k);
    if (!br[i].contains("expr") || !br[i]["expr"].is_string()) fail("missing expression", at + "/expr");
    const auto& im = br[i].contains("image") ? br[i]["image"] : json();
    if (!im.is_array() || im.size() != 2 || !im[0].is_number_integer() || !im[1].is_number_integer())
      fail("expected two element indices", at + "/image");
    s.branches.push_back(br[i]["expr"]);
    s.images.emplace_back(im[0].get<int>(), im[1].get<int>());
  }
  for (const auto& e : expression_list(j["roof"], ptr + "/roof")) s.roof.push_back(e);
  if (j.contains("potential"))
    for (const auto& e : expression_list(j["potential"], ptr + "/potential")) s.potential.push_back(e);
  else
    s.potential = {"0"};
  if (j.contains("alpha")) {
    if (!j["alpha"].is_number() || !(j["alpha"].get<double>() > 0 && j["alpha"].get<double>() <= 1))
      fail("alpha must lie in (0, 1]", ptr + "/alpha");
    s.alpha = j["alpha"];
  }
  return s;
}

json system_to_json(const SystemSpec& s) {
  json j;
  j["name"] = s.name;
  j["partition"] = s.partition;
  j["branches"] = json::array();
  for (std::size_t i = 0; i < s.branches.size(); ++i)
    j["branches"].push_back({{"expr", s.branches[i]}, {"image", {s.images[i].first, s.images[i].second}}});
  j["roof"] = s.roof;
  j["potential"] = s.potential;
  j["alpha"] = s.alpha;
  return j;
}

ExperimentConfig parse_config(const json& doc, std::string_view experiment, const Overrides& ov) {
  if (!doc.is_object()) fail("config must be a JSON object", "");
  const auto& tbl = tables();
  auto it = tbl.find(std::string(experiment));
  if (it == tbl.end()) fail("unknown experiment '" + std::string(experiment) + "'", "/experiment");
  static const std::vector<std::string> top = {"experiment", "system", "preset", "seed", "grid", "parameters"};
  for (const auto& [k, _] : doc.items())
    if (std::find(top.begin(), top.end(), k) == top.end()) fail("unknown key '" + k + "'", "/" + k);

  ExperimentConfig c;
  c.experiment = experiment;
  if (doc.contains("experiment") && doc["experiment"] != std::string(experiment))
    fail("config is for experiment " + doc["experiment"].dump(), "/experiment");

  if (ov.preset) {
    c.system = preset(*ov.preset);
    c.system_source = *ov.preset;
  } else if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) fail("expected a preset name", "/preset");
    try {
      c.system = preset(doc["preset"].get<std::string>());
    } catch (const Error& e) {
      fail(e.what(), "/preset");
    }
    c.system_source = doc["preset"];
  } else if (doc.contains("system")) {
    c.system = system_from_json(doc["system"]);
    c.system_source = "config";
  } else {
    fail("no system: give \"system\", \"preset\" or --preset", "");
  }

  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      fail("expected a non-negative integer", "/seed");
    c.seed = s.get<std::uint64_t>();
  }
  if (ov.seed) c.seed = *ov.seed;

  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    if (!g.is_object()) fail("expected an object", "/grid");
    for (const auto& [k, _] : g.items())
      if (k != "N") fail("unknown key '" + k + "'", "/grid/" + k);
    if (g.contains("N")) {
      if (!g["N"].is_number_integer() || g["N"].get<long long>() < 16 || g["N"].get<long long>() > (1 << 22))
        fail("N must be an integer in [16, 4194304]", "/grid/N");
      c.N = g["N"];
    }
  }

  const Table& spec = it->second;
  json given = doc.contains("parameters") ? doc["parameters"] : json::object();
  if (!given.is_object()) fail("expected an object", "/parameters");
  for (const auto& [k, _] : given.items())
    if (!spec.count(k)) fail("unknown parameter '" + k + "' for " + c.experiment, "/parameters/" + k);
  c.parameters = json::object();
  for (const auto& [k, p] : spec)
    c.parameters[k] = given.contains(k) ? check_param(given[k], p, "/parameters/" + k) : p.fallback;

  if (ov.jobs) {
    if (*ov.jobs < 1) fail("--jobs must be >= 1", "");
    c.jobs = *ov.jobs;
  }
  if (ov.out_dir) c.out_dir = *ov.out_dir;
  return c;
}

ExperimentConfig load_config(const std::string& path, std::string_view experiment, const Overrides& ov) {
  std::ifstream in(path);
  if (!in) fail("cannot read '" + path + "'", "");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what(), "");
  }
  return parse_config(doc, experiment, ov);
}

json ExperimentConfig::resolved() const {
  return {{"experiment", experiment},
          {"system", system_to_json(system)},
          {"system_source", system_source},
          {"seed", seed},
          {"grid", {{"N", N}}},
          {"parameters", parameters}};
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(resolved().dump()); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace gf
