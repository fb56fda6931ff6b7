#include "gibbsflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gibbsflow/errors.hpp"

namespace gf {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Csv::Csv(std::vector<std::string> header) : header_(std::move(header)) {}

Csv& Csv::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw PreconditionFailed("CSV row width does not match the header");
  rows_.push_back(std::move(cells));
  return *this;
}

std::string Csv::str() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << "\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return os.str();
}

void Csv::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw PreconditionFailed("cannot write " + path);
  f << str();
}

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw PreconditionFailed("cannot write " + path);
  f << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PreconditionFailed("cannot read " + path);
  return json::parse(f);
}

namespace {

struct Row {
  std::string cohomologous = "unknown";
  std::string a_trend = "unknown";
  double a_min = NAN;
  std::string contraction = "unknown";
  double xi_hat = NAN;
  std::string mixing = "unknown";
  double c_hat = NAN;
  std::vector<std::string> runs;
};

json maybe(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
std::string dat(double v) { return std::isnan(v) ? "NaN" : num(v); }

}  // namespace

json report_bundle(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) throw MissingManifest("no run directories given");
  std::map<std::string, Row> rows;
  for (const auto& dir : run_dirs) {
    const fs::path mp = fs::path(dir) / "manifest.json";
    if (!fs::exists(mp)) throw MissingManifest(mp.string());
    const json m = read_json(mp.string());
    const std::string exp = m.at("experiment"), sys = m.at("system");
    const json s = read_json((fs::path(dir) / (exp + ".json")).string());
    Row& r = rows[sys];
    r.runs.push_back(dir);
    auto flagged = [&](const std::string& prefix) {
      for (const auto& f : m.at("flags"))
        if (f.get<std::string>().rfind(prefix, 0) == 0) return true;
      return false;
    };
    if (exp == "cohomology") r.cohomologous = s.at("cohomologous").get<bool>() ? "yes" : "no";
    if (exp == "uni") {
      r.cohomologous = s.at("cohomologous").get<bool>() ? "yes" : "no";
      double lo = HUGE_VAL;
      for (const auto& a : s.at("a")) lo = std::min(lo, a.get<double>());
      r.a_min = lo;
      r.a_trend = lo > 1 - 1e-6 ? "1" : "decreasing";
    }
    if (exp == "contraction") {
      if (flagged("no_contraction")) {
        r.contraction = "none";
        r.cohomologous = "yes";
      } else {
        r.xi_hat = s.at("xi_hat");
        r.contraction = r.xi_hat > 0 ? "xi_hat>0" : "none";
      }
    }
    if (exp == "correlate") {
      r.c_hat = s.at("rate");
      r.mixing = s.at("mixing").get<bool>() ? "c_hat>0" : "none";
    }
  }
  json out = json::array();
  std::ostringstream table;
  table << "# system cohomologous a_min xi_hat c_hat\n";
  for (const auto& [name, r] : rows) {
    out.push_back({{"system", name},
                   {"cohomologous", r.cohomologous},
                   {"a_trend", r.a_trend},
                   {"a_min", maybe(r.a_min)},
                   {"contraction", r.contraction},
                   {"xi_hat", maybe(r.xi_hat)},
                   {"mixing", r.mixing},
                   {"c_hat", maybe(r.c_hat)},
                   {"runs", r.runs}});
    table << name << " " << (r.cohomologous == "yes" ? 1 : r.cohomologous == "no" ? 0 : -1) << " " << dat(r.a_min)
          << " " << dat(r.xi_hat) << " " << dat(r.c_hat) << "\n";
  }
  json doc = {{"rows", out}};
  fs::create_directories(out_dir);
  write_json((fs::path(out_dir) / "bundle.json").string(), doc);
  std::ofstream((fs::path(out_dir) / "bundle.dat").string(), std::ios::binary) << table.str();
  return doc;
}

}  // namespace gf
