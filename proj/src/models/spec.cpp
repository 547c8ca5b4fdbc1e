#include "braingraph/models/spec.hpp"

#include <cmath>

#include "braingraph/datasets/csv.hpp"
#include "braingraph/errors.hpp"

namespace braingraph {

namespace {

const std::vector<std::pair<Family, std::string>> kFamilies = {
    {Family::gcn, "gcn"},     {Family::gat, "gat"}, {Family::gin, "gin"},     {Family::stgcn, "stgcn"},
    {Family::astgcn, "astgcn"}, {Family::mlp, "mlp"}, {Family::cnn1d, "cnn1d"}, {Family::svm_rbf, "svm_rbf"},
};

std::size_t parse_size(const std::string& key, const std::string& text) {
  const double v = csv::parse_double(text);
  if (v < 0 || v != std::floor(v)) throw ConfigurationError(key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string to_string(Family f) {
  for (const auto& [family, name] : kFamilies)
    if (family == f) return name;
  return "unknown";
}

std::string to_string(Readout r) {
  switch (r) {
    case Readout::mean: return "mean";
    case Readout::mean_cat_max: return "mean_cat_max";
    case Readout::sum: return "sum";
  }
  return "unknown";
}

std::string to_string(RowNormalizer r) { return r == RowNormalizer::softmax ? "softmax" : "sparsemax"; }

Family parse_family(const std::string& name) {
  for (const auto& [family, n] : kFamilies)
    if (n == name) return family;
  throw ConfigurationError("unknown model family '" + name + "'");
}

Readout parse_readout(const std::string& name) {
  if (name == "mean") return Readout::mean;
  if (name == "mean_cat_max") return Readout::mean_cat_max;
  if (name == "sum") return Readout::sum;
  throw ConfigurationError("unknown readout '" + name + "'");
}

RowNormalizer parse_row_normalizer(const std::string& name) {
  if (name == "softmax") return RowNormalizer::softmax;
  if (name == "sparsemax") return RowNormalizer::sparsemax;
  throw ConfigurationError("unknown row normalizer '" + name + "'");
}

const std::vector<Family>& all_families() {
  static const std::vector<Family> families = [] {
    std::vector<Family> out;
    for (const auto& [f, name] : kFamilies) out.push_back(f);
    return out;
  }();
  return families;
}

bool is_graph_family(Family f) {
  return f == Family::gcn || f == Family::gat || f == Family::gin || f == Family::stgcn || f == Family::astgcn;
}

bool is_neural(Family f) { return f != Family::svm_rbf; }

GraphKind input_kind(Family f) {
  switch (f) {
    case Family::stgcn:
    case Family::cnn1d: return GraphKind::dynamic;
    case Family::astgcn: return GraphKind::dynamic_adaptive;
    default: return GraphKind::static_fc;
  }
}

void ModelSpec::validate() const {
  if (hidden_dim == 0) throw ConfigurationError("hidden_dim must be positive");
  if (family != Family::mlp && family != Family::svm_rbf && family != Family::cnn1d && num_layers == 0) {
    throw ConfigurationError("num_layers must be positive");
  }
  if (heads == 0) throw ConfigurationError("heads must be >= 1");
  if (embedding_dim == 0) throw ConfigurationError("embedding_dim must be positive");
  if (kernel_size == 0) throw ConfigurationError("kernel_size must be positive");
  if ((family == Family::stgcn || family == Family::astgcn) && kernel_size % 2 == 0) {
    throw ConfigurationError("temporal kernel size must be odd for same padding");
  }
  if (cnn_stride == 0) throw ConfigurationError("cnn_stride must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigurationError("dropout must be in [0, 1)");
  if (!(svm_c > 0.0)) throw ConfigurationError("svm C must be positive");
  if (!(svm_gamma >= 0.0)) throw ConfigurationError("svm gamma must be >= 0");
}

std::map<std::string, std::string> ModelSpec::to_map() const {
  return {
      {"family", to_string(family)},
      {"num_layers", std::to_string(num_layers)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"readout", to_string(readout)},
      {"heads", std::to_string(heads)},
      {"embedding_dim", std::to_string(embedding_dim)},
      {"row_normalizer", to_string(row_normalizer)},
      {"kernel_size", std::to_string(kernel_size)},
      {"cnn_stride", std::to_string(cnn_stride)},
      {"dropout", csv::format_double(dropout)},
      {"svm_c", csv::format_double(svm_c)},
      {"svm_gamma", csv::format_double(svm_gamma)},
  };
}

ModelSpec ModelSpec::from_map(const std::map<std::string, std::string>& values) {
  ModelSpec s;
  for (const auto& [key, v] : values) {
    if (key == "family") {
      s.family = parse_family(v);
    } else if (key == "num_layers") {
      s.num_layers = parse_size(key, v);
    } else if (key == "hidden_dim") {
      s.hidden_dim = parse_size(key, v);
    } else if (key == "readout") {
      s.readout = parse_readout(v);
    } else if (key == "heads") {
      s.heads = parse_size(key, v);
    } else if (key == "embedding_dim") {
      s.embedding_dim = parse_size(key, v);
    } else if (key == "row_normalizer") {
      s.row_normalizer = parse_row_normalizer(v);
    } else if (key == "kernel_size") {
      s.kernel_size = parse_size(key, v);
    } else if (key == "cnn_stride") {
      s.cnn_stride = parse_size(key, v);
    } else if (key == "dropout") {
      s.dropout = csv::parse_double(v);
    } else if (key == "svm_c") {
      s.svm_c = csv::parse_double(v);
    } else if (key == "svm_gamma") {
      s.svm_gamma = csv::parse_double(v);
    } else {
      throw ConfigurationError("unknown model setting '" + key + "'");
    }
  }
  s.validate();
  return s;
}

std::string ModelSpec::describe() const {
  std::string out;
  for (const auto& [k, v] : to_map()) {
    if (!out.empty()) out += ';';
    out += k + '=' + v;
  }
  return out;
}

Prediction Prediction::from_logit(double logit) {
  Prediction p;
  p.logit = logit;
  p.probability = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  p.label = p.probability > 0.5 ? 1 : 0;
  return p;
}

}  // namespace braingraph
