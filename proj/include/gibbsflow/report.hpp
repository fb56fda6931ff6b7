#pragma once

#include <string>
#include <vector>

#include "gibbsflow/config.hpp"

namespace gf {

// Fixed "%.12g" formatting so repeated runs give byte-identical files.
std::string num(double v);

class Csv {
 public:
  explicit Csv(std::vector<std::string> header);
  Csv& row(std::vector<std::string> cells);
  std::string str() const;
  void write(const std::string& path) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

// Reads <dir>/manifest.json of every run (MissingManifest otherwise) and
// writes bundle.json plus bundle.dat (whitespace columns) into out_dir.
// Returns the bundle document.
json report_bundle(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace gf
