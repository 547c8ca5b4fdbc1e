#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "braingraph/experiments/protocol.hpp"

namespace braingraph {

// One line of report_folds.csv.
struct FoldRow {
  std::string experiment;
  std::string family;
  std::size_t fold = 0;
  Confusion counts;
  Metrics metrics;
  std::string chosen_hparams;
  bool aborted = false;  // metrics are empty and chosen_hparams carries the error
};

// One line of report_summary.csv.
struct SummaryRow {
  std::string family;
  std::string metric;  // bal_acc, sens, spec
  double mean = 0.0;
  double std = 0.0;
};

inline const std::vector<std::string> kFoldHeader = {"experiment", "family", "fold",    "tp",   "fp", "tn",
                                                     "fn",         "bal_acc", "sens", "spec", "chosen_hparams"};
inline const std::vector<std::string> kSummaryHeader = {"family", "metric", "mean", "std"};

std::vector<FoldRow> fold_rows(const ExperimentReport& report);
// Mean and sample std per family and metric over non-aborted rows, families in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<FoldRow>& rows);

void write_fold_report(const std::filesystem::path& path, const std::vector<FoldRow>& rows);
std::vector<FoldRow> read_fold_report(const std::filesystem::path& path);
void write_summary(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary(const std::filesystem::path& path);

}  // namespace braingraph
