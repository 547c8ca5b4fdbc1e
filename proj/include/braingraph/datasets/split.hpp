#pragma once

#include <cstdint>
#include <vector>

namespace braingraph {

using IndexList = std::vector<std::size_t>;

struct Fold {
  IndexList test;
  IndexList train;
  IndexList validation;
};

struct SplitPlan {
  std::size_t num_folds = 0;
  std::vector<int> fold_of;  // outer fold of every subject
  std::vector<Fold> folds;
};

// Default fraction of the outer-training portion held out for early stopping and model selection.
inline constexpr double kValidationFraction = 0.15;

// Orders `indices` so that every prefix keeps the class mix as close as possible to the whole.
IndexList stratified_order(const std::vector<int>& labels, const IndexList& indices, std::uint64_t seed);

// Splits `indices` into (train, validation) with `fraction` of each class going to validation.
std::pair<IndexList, IndexList> stratified_holdout(const std::vector<int>& labels, const IndexList& indices,
                                                   double fraction, std::uint64_t seed);

SplitPlan stratified_kfold(const std::vector<int>& labels, std::size_t k, std::uint64_t seed,
                           double validation_fraction = kValidationFraction);

struct Subsample {
  IndexList test;
  std::vector<std::size_t> sizes;
  std::vector<IndexList> train;  // train[i] has sizes[i] entries; each is a prefix of the next larger
};

Subsample subsample_train(const std::vector<int>& labels, const std::vector<std::size_t>& sizes,
                          std::size_t test_size, std::uint64_t seed);

}  // namespace braingraph
