#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "braingraph/graph_construction/graph.hpp"
#include "braingraph/models/spec.hpp"

namespace braingraph {

struct TrainOptions {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;

  void validate() const;
};

// Everything that determines one training run apart from data and seed.
struct RunConfig {
  ModelSpec model;
  TrainOptions train;
  GraphOptions graph;

  // Accepts any ModelSpec key plus lr, weight_decay, batch_size, max_epochs, patience,
  // keep_fraction, ranking, diffusion, diffusion_t, diffusion_alpha, transition, diffusion_order.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  void validate() const;
};

RunConfig default_run_config(Family family);

// Parameter name -> candidate values, enumerated in lexicographic key order with the
// last key varying fastest.
class HyperGrid {
 public:
  HyperGrid() = default;
  explicit HyperGrid(std::map<std::string, std::vector<std::string>> axes);

  void set_axis(const std::string& key, std::vector<std::string> values);
  const std::map<std::string, std::vector<std::string>>& axes() const { return axes_; }
  std::size_t size() const;
  std::map<std::string, std::string> point(std::size_t index) const;

  // Default search space for a family.
  static HyperGrid defaults(Family family);

 private:
  std::map<std::string, std::vector<std::string>> axes_;
};

// "k=v;k=v" in key order, used for report columns.
std::string format_assignment(const std::map<std::string, std::string>& values);

RunConfig with_assignment(RunConfig base, const std::map<std::string, std::string>& assignment);

// Flat INI text: [section] headers, key = value lines, '#' or ';' comments.
using IniFile = std::map<std::string, std::map<std::string, std::string>>;
IniFile parse_ini(const std::string& text);
IniFile read_ini(const std::filesystem::path& path);

// start:stop:step, inclusive of stop when reached within rounding; a plain number or a
// comma list is also accepted.
std::vector<double> parse_range(const std::string& text);
std::vector<std::string> split_list(const std::string& text, char sep = ',');

}  // namespace braingraph
