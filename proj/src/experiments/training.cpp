#include "braingraph/experiments/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "braingraph/errors.hpp"
#include "braingraph/numerics/optimizer.hpp"

namespace braingraph {

namespace {

Tensor svm_features(const GraphSet& graphs, const IndexList& indices) {
  if (indices.empty()) return {};
  const std::size_t p = fc_lower_triangle(graphs[indices[0]].node_features).size();
  Tensor x({indices.size(), p}, 0.0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Tensor v = fc_lower_triangle(graphs[indices[r]].node_features);
    if (v.size() != p) throw ContractError("svm inputs differ in size");
    std::copy(v.values().begin(), v.values().end(), x.values().begin() + static_cast<std::ptrdiff_t>(r * p));
  }
  return x;
}

std::vector<int> labels_of(const GraphSet& graphs, const IndexList& indices) {
  std::vector<int> y;
  y.reserve(indices.size());
  for (std::size_t i : indices) y.push_back(graphs[i].label);
  return y;
}

void check_inputs(const GraphSet& graphs, const IndexList& train, const IndexList& validation) {
  if (train.empty()) throw ContractError("empty training set");
  if (validation.empty()) throw ContractError("empty validation set");
  std::set<std::size_t> seen(train.begin(), train.end());
  for (std::size_t i : validation)
    if (seen.contains(i)) throw ContractError("subject " + std::to_string(i) + " is in both train and validation");
  for (std::size_t i : seen)
    if (i >= graphs.size()) throw ContractError("train index out of range");
  for (std::size_t i : validation)
    if (i >= graphs.size()) throw ContractError("validation index out of range");
  bool has[2] = {false, false};
  for (std::size_t i : train) has[graphs[i].label == 1] = true;
  if (!has[0] || !has[1]) throw ContractError("training set holds a single class");
}

TrainedModel train_svm(const RunConfig& config, const GraphSet& graphs, const IndexList& train,
                       const IndexList& validation) {
  const SvmSolution sol =
      svm_rbf_train(svm_features(graphs, train), labels_of(graphs, train), {config.model.svm_c, config.model.svm_gamma});
  TrainedModel m;
  m.spec = config.model;
  m.input = input_shape(config.model, graphs[train[0]]);
  m.parameters = svm_to_parameters(sol.model);
  m.best_epoch = 1;
  m.history.push_back({1, 0.0, 0.0});
  m.history[0].train_loss = mean_loss(m, graphs, train);
  m.history[0].val_loss = mean_loss(m, graphs, validation);
  return m;
}

}  // namespace

std::string graph_key(const RunConfig& config) {
  const Family f = config.model.family;
  if (f == Family::mlp || f == Family::svm_rbf) return "fc";
  if (f == Family::astgcn || f == Family::cnn1d) return "series";
  const std::string kind = input_kind(f) == GraphKind::dynamic ? "dynamic" : "static";
  return kind + "|keep=" + std::to_string(config.graph.keep_fraction) +
         (config.graph.ranking == EdgeRanking::magnitude ? "|abs" : "") + "|" + config.graph.diffusion.describe();
}

BrainGraph default_graph(const Subject& subject, std::size_t, const RunConfig& config) {
  switch (input_kind(config.model.family)) {
    case GraphKind::static_fc: return build_static_graph(subject, config.graph);
    case GraphKind::dynamic: return build_dynamic_graph(subject, config.graph, config.model.family == Family::cnn1d);
    case GraphKind::dynamic_adaptive: return build_dynamic_graph(subject, config.graph, true);
  }
  throw ContractError("unhandled graph kind");
}

GraphCache::GraphCache(const TimeSeriesDataset& dataset, GraphBuilder builder)
    : dataset_(dataset), builder_(std::move(builder)) {}

std::shared_ptr<const GraphSet> GraphCache::graphs(const RunConfig& config) {
  const std::string key = graph_key(config);
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  auto set = std::make_shared<GraphSet>();
  set->reserve(dataset_.size());
  for (std::size_t i = 0; i < dataset_.size(); ++i) set->push_back(builder_(dataset_.subjects[i], i, config));
  cache_[key] = set;
  return set;
}

double mean_loss(const TrainedModel& model, const GraphSet& graphs, const IndexList& indices) {
  if (indices.empty()) throw ContractError("loss over an empty set");
  double total = 0.0;
  for (std::size_t i : indices) {
    const double z = predict(model, graphs[i]).logit;
    const double y = graphs[i].label;
    if (model.spec.family == Family::svm_rbf) {
      total += std::max(0.0, 1.0 - (2.0 * y - 1.0) * z);
    } else {
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
  }
  const double loss = total / static_cast<double>(indices.size());
  if (!std::isfinite(loss)) throw TrainingError("non-finite loss");
  return loss;
}

double best_validation_loss(const TrainedModel& model) {
  for (const auto& e : model.history)
    if (e.epoch == model.best_epoch) return e.val_loss;
  throw ContractError("model history does not contain its best epoch");
}

Confusion evaluate(const TrainedModel& model, const GraphSet& graphs, const IndexList& indices) {
  std::vector<int> truth, predicted;
  for (std::size_t i : indices) {
    truth.push_back(graphs[i].label);
    predicted.push_back(predict(model, graphs[i]).label);
  }
  return confusion(truth, predicted);
}

TrainedModel train_model(const RunConfig& config, const GraphSet& graphs, const IndexList& train,
                         const IndexList& validation, std::uint64_t seed) {
  config.validate();
  check_inputs(graphs, train, validation);
  if (config.model.family == Family::svm_rbf) return train_svm(config, graphs, train, validation);

  const Rng root(seed);
  Rng init = root.stream("init");
  TrainedModel model;
  model.spec = config.model;
  model.input = input_shape(config.model, graphs[train[0]]);
  model.parameters = init_parameters(config.model, model.input, init);

  OptimizerState opt;
  opt.learning_rate = config.train.learning_rate;
  opt.weight_decay = config.train.weight_decay;

  ParameterSet current = model.parameters;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t batch = config.train.batch_size;
  for (std::size_t epoch = 1; epoch <= config.train.max_epochs; ++epoch) {
    IndexList order = train;
    Rng shuffle = root.stream("shuffle", epoch);
    shuffle.shuffle(order);
    Rng drop = root.stream("dropout", epoch);
    const ForwardContext ctx{true, &drop};

    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      Tape tape;
      Var sum;
      for (std::size_t k = start; k < end; ++k) {
        const BrainGraph& g = graphs[order[k]];
        Var loss = ad::bce_with_logits(forward(config.model, tape, current, g, ctx), g.label);
        sum = sum.valid() ? ad::add(sum, loss) : loss;
      }
      Var loss = ad::scale(sum, 1.0 / static_cast<double>(end - start));
      const double value = loss.value().item();
      if (!std::isfinite(value)) throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      adam_step(current, tape.backward(loss), opt);
      total += value * static_cast<double>(end - start);
    }

    TrainedModel probe{config.model, model.input, current, {}, 0};
    EpochRecord record{epoch, total / static_cast<double>(order.size()), mean_loss(probe, graphs, validation)};
    model.history.push_back(record);
    if (record.val_loss < best) {
      best = record.val_loss;
      model.parameters = current;
      model.best_epoch = epoch;
    } else if (epoch - model.best_epoch >= config.train.patience) {
      break;
    }
  }
  return model;
}

}  // namespace braingraph
