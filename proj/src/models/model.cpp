#include "braingraph/models/model.hpp"

#include <fstream>
#include <optional>

#include "braingraph/datasets/csv.hpp"
#include "braingraph/errors.hpp"

namespace braingraph {

Prediction predict(const TrainedModel& model, const BrainGraph& graph) {
  if (model.spec.family == Family::svm_rbf) {
    const SvmModel svm = svm_from_parameters(model.parameters);
    const Tensor v = fc_lower_triangle(graph.node_features);
    return Prediction::from_logit(svm.decision(v.values()));
  }
  Tape tape;
  return Prediction::from_logit(forward(model.spec, tape, model.parameters, graph).value().item());
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "# shape";
  for (std::size_t d : t.shape()) out << ',' << d;
  out << '\n';
  const std::size_t rows = t.rank() == 0 ? 1 : t.dim(0);
  const std::size_t cols = rows == 0 ? 0 : t.size() / rows;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << csv::format_double(t[r * cols + c]);
    }
    out << '\n';
  }
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty tensor file");
  auto cells = csv::split_line(line);
  if (cells.empty() || cells[0] != "# shape") throw SchemaError(path.string() + ": missing '# shape' header");
  Shape shape;
  for (std::size_t i = 1; i < cells.size(); ++i) shape.push_back(static_cast<std::size_t>(csv::parse_double(cells[i])));
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    for (const auto& cell : csv::split_line(line)) values.push_back(csv::parse_double(cell));
  }
  if (values.size() != shape_size(shape)) {
    throw SchemaError(path.string() + ": " + std::to_string(values.size()) + " values for shape " + shape_string(shape));
  }
  return Tensor(shape, std::move(values));
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  csv::Table spec;
  spec.header = {"key", "value"};
  for (const auto& [k, v] : model.spec.to_map()) spec.rows.push_back({k, v});
  spec.rows.push_back({"input_nodes", std::to_string(model.input.num_nodes)});
  spec.rows.push_back({"input_features", std::to_string(model.input.feature_dim)});
  spec.rows.push_back({"best_epoch", std::to_string(model.best_epoch)});
  csv::write_table(dir / "spec.csv", spec);

  csv::Table history;
  history.header = {"epoch", "train_loss", "val_loss"};
  for (const auto& e : model.history) {
    history.rows.push_back({std::to_string(e.epoch), csv::format_double(e.train_loss), csv::format_double(e.val_loss)});
  }
  csv::write_table(dir / "history.csv", history);

  for (const auto& p : model.parameters) write_tensor(dir / ("param_" + p.name + ".csv"), p.value);
}

TrainedModel load_checkpoint(const std::filesystem::path& dir) {
  const csv::Table spec = csv::read_table(dir / "spec.csv");
  std::map<std::string, std::string> values;
  TrainedModel model;
  for (const auto& row : spec.rows) {
    if (row[0] == "input_nodes") {
      model.input.num_nodes = static_cast<std::size_t>(csv::parse_double(row[1]));
    } else if (row[0] == "input_features") {
      model.input.feature_dim = static_cast<std::size_t>(csv::parse_double(row[1]));
    } else if (row[0] == "best_epoch") {
      model.best_epoch = static_cast<std::size_t>(csv::parse_double(row[1]));
    } else {
      values[row[0]] = row[1];
    }
  }
  model.spec = ModelSpec::from_map(values);

  if (std::filesystem::exists(dir / "history.csv")) {
    const csv::Table history = csv::read_table(dir / "history.csv");
    for (const auto& row : history.rows) {
      model.history.push_back({static_cast<std::size_t>(csv::parse_double(row[0])), csv::parse_double(row[1]),
                               csv::parse_double(row[2])});
    }
  }

  // Restore in the order a fresh model would create them so checkpoints round-trip exactly.
  std::vector<std::pair<std::string, std::optional<Shape>>> expected;
  if (model.spec.family == Family::svm_rbf) {
    for (const char* name : {"svm.sv", "svm.coef", "svm.bias", "svm.gamma"}) expected.emplace_back(name, std::nullopt);
  } else {
    Rng rng(0);
    for (const auto& p : init_parameters(model.spec, model.input, rng)) expected.emplace_back(p.name, p.value.shape());
  }
  for (const auto& [name, shape] : expected) {
    const auto path = dir / ("param_" + name + ".csv");
    if (!std::filesystem::exists(path)) throw IngestionError("checkpoint is missing " + path.filename().string());
    Tensor value = read_tensor(path);
    if (shape && value.shape() != *shape) {
      throw SchemaError(path.filename().string() + " has shape " + shape_string(value.shape()) + ", spec implies " +
                        shape_string(*shape));
    }
    model.parameters.add(name, std::move(value));
  }
  return model;
}

}  // namespace braingraph
