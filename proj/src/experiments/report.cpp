#include "braingraph/experiments/report.hpp"

#include <algorithm>

#include "braingraph/datasets/csv.hpp"
#include "braingraph/errors.hpp"

namespace braingraph {

namespace {

std::size_t count_cell(const std::string& s) { return static_cast<std::size_t>(csv::parse_double(s)); }

// Cells are written unquoted, so free text loses its separators.
std::string plain_cell(std::string s) {
  std::replace(s.begin(), s.end(), ',', ' ');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void expect_header(const csv::Table& t, const std::vector<std::string>& header, const std::filesystem::path& path) {
  if (t.header != header) throw SchemaError(path.string() + ": unexpected header");
}

}  // namespace

std::vector<FoldRow> fold_rows(const ExperimentReport& report) {
  std::vector<FoldRow> rows;
  for (const auto& f : report.folds) {
    FoldRow r;
    r.experiment = report.experiment;
    r.family = to_string(report.family);
    r.fold = f.fold;
    r.counts = f.counts;
    r.metrics = f.metrics;
    r.aborted = f.aborted();
    r.chosen_hparams = r.aborted ? "aborted: " + f.error : f.chosen_hparams;
    rows.push_back(r);
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<FoldRow>& rows) {
  std::vector<std::string> families;
  for (const auto& r : rows)
    if (std::find(families.begin(), families.end(), r.family) == families.end()) families.push_back(r.family);
  std::vector<SummaryRow> out;
  for (const auto& fam : families) {
    std::vector<double> bal, sens, spec;
    for (const auto& r : rows) {
      if (r.family != fam || r.aborted) continue;
      bal.push_back(r.metrics.balanced_accuracy);
      sens.push_back(r.metrics.sensitivity);
      spec.push_back(r.metrics.specificity);
    }
    const std::pair<const char*, std::vector<double>*> metrics[] = {{"bal_acc", &bal}, {"sens", &sens}, {"spec", &spec}};
    for (const auto& [name, values] : metrics) {
      const MeanStd ms = mean_std(*values);
      out.push_back({fam, name, ms.mean, ms.std});
    }
  }
  return out;
}

void write_fold_report(const std::filesystem::path& path, const std::vector<FoldRow>& rows) {
  csv::Table t;
  t.header = kFoldHeader;
  for (const auto& r : rows) {
    std::vector<std::string> line = {r.experiment, r.family, std::to_string(r.fold)};
    if (r.aborted) {
      line.insert(line.end(), 7, "");
    } else {
      for (std::size_t v : {r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn}) line.push_back(std::to_string(v));
      for (double v : {r.metrics.balanced_accuracy, r.metrics.sensitivity, r.metrics.specificity}) {
        line.push_back(csv::format_double(v));
      }
    }
    line.push_back(plain_cell(r.chosen_hparams));
    t.rows.push_back(std::move(line));
  }
  csv::write_table(path, t);
}

std::vector<FoldRow> read_fold_report(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path);
  expect_header(t, kFoldHeader, path);
  std::vector<FoldRow> rows;
  for (const auto& line : t.rows) {
    FoldRow r;
    r.experiment = line[0];
    r.family = line[1];
    r.fold = count_cell(line[2]);
    r.aborted = line[3].empty();
    if (!r.aborted) {
      r.counts = {count_cell(line[3]), count_cell(line[4]), count_cell(line[5]), count_cell(line[6])};
      r.metrics = {csv::parse_double(line[7]), csv::parse_double(line[8]), csv::parse_double(line[9])};
    }
    r.chosen_hparams = line[10];
    rows.push_back(r);
  }
  return rows;
}

void write_summary(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  csv::Table t;
  t.header = kSummaryHeader;
  for (const auto& r : rows) t.rows.push_back({r.family, r.metric, csv::format_double(r.mean), csv::format_double(r.std)});
  csv::write_table(path, t);
}

std::vector<SummaryRow> read_summary(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path);
  expect_header(t, kSummaryHeader, path);
  std::vector<SummaryRow> rows;
  for (const auto& line : t.rows) rows.push_back({line[0], line[1], csv::parse_double(line[2]), csv::parse_double(line[3])});
  return rows;
}

}  // namespace braingraph
