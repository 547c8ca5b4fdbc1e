#include "braingraph/datasets/split.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "braingraph/errors.hpp"
#include "braingraph/numerics/random.hpp"

namespace braingraph {

namespace {

std::vector<IndexList> by_class(const std::vector<int>& labels, const IndexList& indices) {
  std::vector<IndexList> groups(2);
  for (std::size_t i : indices) {
    if (i >= labels.size()) throw ContractError("index out of range in split");
    const int y = labels[i];
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    groups[static_cast<std::size_t>(y)].push_back(i);
  }
  return groups;
}

}  // namespace

IndexList stratified_order(const std::vector<int>& labels, const IndexList& indices, std::uint64_t seed) {
  Rng rng(seed);
  auto groups = by_class(labels, indices);
  // Position k of a class with n members sits at (k + 0.5) / n on a shared [0,1) axis.
  std::vector<std::tuple<double, int, std::size_t>> keyed;
  for (int c = 0; c < 2; ++c) {
    auto& g = groups[static_cast<std::size_t>(c)];
    Rng local = rng.stream(static_cast<std::uint64_t>(c));
    local.shuffle(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      keyed.emplace_back((static_cast<double>(k) + 0.5) / static_cast<double>(g.size()), c, g[k]);
    }
  }
  std::sort(keyed.begin(), keyed.end());
  IndexList out;
  out.reserve(keyed.size());
  for (const auto& [key, c, idx] : keyed) out.push_back(idx);
  return out;
}

std::pair<IndexList, IndexList> stratified_holdout(const std::vector<int>& labels, const IndexList& indices,
                                                   double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigurationError("holdout fraction must be in [0, 1)");
  Rng rng(seed);
  auto groups = by_class(labels, indices);
  IndexList train, held;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& g = groups[c];
    Rng local = rng.stream(c);
    local.shuffle(g);
    auto n_held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(g.size())));
    if (fraction > 0.0 && n_held == 0 && g.size() >= 2) n_held = 1;
    held.insert(held.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_held));
    train.insert(train.end(), g.begin() + static_cast<std::ptrdiff_t>(n_held), g.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {train, held};
}

SplitPlan stratified_kfold(const std::vector<int>& labels, std::size_t k, std::uint64_t seed,
                           double validation_fraction) {
  if (k < 2) throw ConfigurationError("k-fold needs k >= 2");
  IndexList all(labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto groups = by_class(labels, all);
  for (std::size_t c = 0; c < 2; ++c) {
    if (groups[c].size() < k) {
      throw ConfigurationError("class " + std::to_string(c) + " has " + std::to_string(groups[c].size()) +
                               " subjects, fewer than k=" + std::to_string(k));
    }
  }

  Rng rng(seed);
  SplitPlan plan;
  plan.num_folds = k;
  plan.fold_of.assign(labels.size(), -1);
  // Deal each class round-robin; class 1 resumes where class 0 stopped so fold totals stay level.
  std::size_t next = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& g = groups[c];
    Rng local = rng.stream("outer").stream(c);
    local.shuffle(g);
    for (std::size_t idx : g) {
      plan.fold_of[idx] = static_cast<int>(next);
      next = (next + 1) % k;
    }
  }

  plan.folds.resize(k);
  for (std::size_t f = 0; f < k; ++f) {
    IndexList rest;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (plan.fold_of[i] == static_cast<int>(f)) {
        plan.folds[f].test.push_back(i);
      } else {
        rest.push_back(i);
      }
    }
    auto [train, val] = stratified_holdout(labels, rest, validation_fraction, rng.stream("inner", f).key());
    plan.folds[f].train = std::move(train);
    plan.folds[f].validation = std::move(val);
  }
  return plan;
}

Subsample subsample_train(const std::vector<int>& labels, const std::vector<std::size_t>& sizes,
                          std::size_t test_size, std::uint64_t seed) {
  if (sizes.empty()) throw ConfigurationError("subsample_train needs at least one size");
  const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
  if (largest + test_size > labels.size()) {
    throw ConfigurationError("training size " + std::to_string(largest) + " plus test size " +
                             std::to_string(test_size) + " exceeds " + std::to_string(labels.size()) + " subjects");
  }
  Rng rng(seed);
  IndexList all(labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  const IndexList order = stratified_order(labels, all, rng.stream("test").key());
  Subsample out;
  out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_size));
  const IndexList rest(order.begin() + static_cast<std::ptrdiff_t>(test_size), order.end());
  const IndexList pool = stratified_order(labels, rest, rng.stream("pool").key());

  out.sizes = sizes;
  for (std::size_t s : sizes) out.train.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(s));
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace braingraph
