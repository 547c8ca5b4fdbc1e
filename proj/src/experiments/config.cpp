#include "braingraph/experiments/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "braingraph/datasets/csv.hpp"
#include "braingraph/errors.hpp"

namespace braingraph {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double number(const std::string& key, const std::string& v) {
  try {
    return csv::parse_double(v);
  } catch (const DataError&) {
    throw ConfigurationError(key + ": expected a number, got '" + v + "'");
  }
}

std::size_t count(const std::string& key, const std::string& v) {
  const double d = number(key, v);
  if (d < 0 || d != std::floor(d)) throw ConfigurationError(key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(d);
}

EdgeRanking parse_ranking(const std::string& v) {
  if (v == "signed") return EdgeRanking::signed_value;
  if (v == "magnitude") return EdgeRanking::magnitude;
  throw ConfigurationError("unknown edge ranking '" + v + "' (signed, magnitude)");
}

}  // namespace

void TrainOptions::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigurationError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigurationError("weight_decay must be non-negative");
  if (batch_size == 0) throw ConfigurationError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigurationError("max_epochs must be positive");
  if (patience == 0) throw ConfigurationError("patience must be positive");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto model_map = model.to_map();
  if (model_map.contains(key)) {
    model_map[key] = value;
    model = ModelSpec::from_map(model_map);
  } else if (key == "lr") {
    train.learning_rate = number(key, value);
  } else if (key == "weight_decay") {
    train.weight_decay = number(key, value);
  } else if (key == "batch_size") {
    train.batch_size = count(key, value);
  } else if (key == "max_epochs") {
    train.max_epochs = count(key, value);
  } else if (key == "patience") {
    train.patience = count(key, value);
  } else if (key == "keep_fraction") {
    graph.keep_fraction = number(key, value);
  } else if (key == "ranking") {
    graph.ranking = parse_ranking(value);
  } else if (key == "diffusion") {
    graph.diffusion.scheme = parse_diffusion_scheme(value);
  } else if (key == "diffusion_t") {
    graph.diffusion.t = number(key, value);
  } else if (key == "diffusion_alpha") {
    graph.diffusion.alpha = number(key, value);
  } else if (key == "transition") {
    graph.diffusion.transition = parse_transition(value);
  } else if (key == "diffusion_order") {
    graph.diffusion.order = count(key, value);
  } else {
    throw ConfigurationError("unknown hyperparameter '" + key + "'");
  }
}

std::map<std::string, std::string> RunConfig::to_map() const {
  auto m = model.to_map();
  m["lr"] = csv::format_double(train.learning_rate);
  m["weight_decay"] = csv::format_double(train.weight_decay);
  m["batch_size"] = std::to_string(train.batch_size);
  m["max_epochs"] = std::to_string(train.max_epochs);
  m["patience"] = std::to_string(train.patience);
  m["keep_fraction"] = csv::format_double(graph.keep_fraction);
  m["ranking"] = graph.ranking == EdgeRanking::signed_value ? "signed" : "magnitude";
  const auto& d = graph.diffusion;
  m["diffusion"] = d.scheme == DiffusionScheme::none ? "none" : d.scheme == DiffusionScheme::heat ? "heat" : "ppr";
  m["diffusion_t"] = csv::format_double(d.t);
  m["diffusion_alpha"] = csv::format_double(d.alpha);
  m["transition"] = d.transition == Transition::sym ? "sym" : "rw";
  m["diffusion_order"] = std::to_string(d.order);
  return m;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(graph.keep_fraction > 0.0 && graph.keep_fraction <= 1.0)) {
    throw ConfigurationError("keep_fraction must lie in (0, 1]");
  }
  graph.diffusion.validate();
}

RunConfig default_run_config(Family family) {
  RunConfig c;
  c.model.family = family;
  return c;
}

HyperGrid::HyperGrid(std::map<std::string, std::vector<std::string>> axes) {
  for (auto& [k, v] : axes) set_axis(k, std::move(v));
}

void HyperGrid::set_axis(const std::string& key, std::vector<std::string> values) {
  if (values.empty()) throw ConfigurationError("grid axis '" + key + "' has no values");
  RunConfig probe;
  for (const auto& v : values) probe.set(key, v);
  axes_[key] = std::move(values);
}

std::size_t HyperGrid::size() const {
  std::size_t n = 1;
  for (const auto& [k, v] : axes_) n *= v.size();
  return n;
}

std::map<std::string, std::string> HyperGrid::point(std::size_t index) const {
  if (index >= size()) throw ConfigurationError("grid point " + std::to_string(index) + " out of range");
  std::map<std::string, std::string> out;
  for (auto it = axes_.rbegin(); it != axes_.rend(); ++it) {
    out[it->first] = it->second[index % it->second.size()];
    index /= it->second.size();
  }
  return out;
}

HyperGrid HyperGrid::defaults(Family family) {
  HyperGrid g;
  if (family == Family::svm_rbf) {
    g.set_axis("svm_c", {"0.1", "1", "10", "100"});
    g.set_axis("svm_gamma", {"0", "0.01", "0.001"});
    return g;
  }
  g.set_axis("lr", {"0.01", "0.001", "0.0001"});
  g.set_axis("hidden_dim", {"32", "64", "128"});
  g.set_axis("dropout", {"0", "0.3"});
  g.set_axis("weight_decay", {"0", "0.0001"});
  if (is_graph_family(family)) g.set_axis("readout", {"mean", "mean_cat_max", "sum"});
  if (family == Family::gcn || family == Family::gat || family == Family::gin || family == Family::stgcn) {
    g.set_axis("keep_fraction", {"0.85", "0.7", "0.5", "0.25", "0.1"});
  }
  if (family == Family::gat) g.set_axis("heads", {"1", "2", "4"});
  if (family == Family::stgcn || family == Family::astgcn) g.set_axis("num_layers", {"1", "2", "3"});
  if (family == Family::astgcn) {
    g.set_axis("embedding_dim", {"8", "16", "32"});
    g.set_axis("row_normalizer", {"softmax", "sparsemax"});
  }
  return g;
}

std::string format_assignment(const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& [k, v] : values) {
    if (!out.empty()) out += ';';
    out += k + '=' + v;
  }
  return out;
}

RunConfig with_assignment(RunConfig base, const std::map<std::string, std::string>& assignment) {
  for (const auto& [k, v] : assignment) base.set(k, v);
  return base;
}

IniFile parse_ini(const std::string& text) {
  IniFile ini;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigurationError("line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      ini[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigurationError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigurationError("line " + std::to_string(line_no) + ": empty key");
    if (ini[section].contains(key)) {
      throw ConfigurationError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    ini[section][key] = trim(line.substr(eq + 1));
  }
  return ini;
}

IniFile read_ini(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_ini(text.str());
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<double> parse_range(const std::string& text) {
  const auto parts = split_list(text, ':');
  std::vector<double> out;
  if (parts.size() == 3) {
    const double start = number("range", parts[0]), stop = number("range", parts[1]), step = number("range", parts[2]);
    if (!(step > 0.0)) throw ConfigurationError("range step must be positive");
    if (stop < start) throw ConfigurationError("range stop is below start");
    const double span = (stop - start) / step;
    const auto n = static_cast<std::size_t>(std::floor(span + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) {
      const double v = start + static_cast<double>(i) * step;
      // snap to a short decimal so 0.05:0.5:0.05 yields 0.15, not 0.15000000000000002
      out.push_back(std::round(v * 1e12) / 1e12);
    }
    return out;
  }
  if (parts.size() != 1) throw ConfigurationError("range '" + text + "' must be start:stop:step");
  for (const auto& item : split_list(text, ',')) out.push_back(number("range", item));
  if (out.empty()) throw ConfigurationError("empty range");
  return out;
}

}  // namespace braingraph
