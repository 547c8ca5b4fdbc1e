#include "braingraph/datasets/dataset.hpp"

#include <cmath>
#include <cstring>
#include <set>

#include "braingraph/datasets/csv.hpp"
#include "braingraph/errors.hpp"
#include "braingraph/numerics/random.hpp"

namespace braingraph {

std::vector<int> TimeSeriesDataset::labels() const {
  std::vector<int> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(s.label);
  return out;
}

void TimeSeriesDataset::validate() const {
  if (subjects.empty()) throw ConfigurationError("dataset has no subjects");
  std::set<std::string> ids;
  bool seen[2] = {false, false};
  for (const auto& s : subjects) {
    if (!ids.insert(s.id).second) throw SchemaError("duplicate subject id " + s.id);
    if (s.label != 0 && s.label != 1) throw DataError("subject " + s.id + ": label must be 0 or 1");
    seen[s.label] = true;
    if (s.timecourses.rank() != 2) throw SchemaError("subject " + s.id + ": timecourses must be a matrix");
    if (s.num_rois() != num_rois) {
      throw SchemaError("subject " + s.id + " has " + std::to_string(s.num_rois()) + " ROIs, expected " +
                        std::to_string(num_rois));
    }
    if (s.num_timepoints() < 2) throw DataError("subject " + s.id + ": fewer than 2 timepoints");
    if (!s.timecourses.all_finite()) throw DataError("subject " + s.id + ": non-finite values");
  }
  if (num_rois < 2) throw SchemaError("dataset needs at least 2 ROIs");
  if (!seen[0] || !seen[1]) throw ConfigurationError("dataset must contain both labels");
}

std::uint64_t TimeSeriesDataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) { h = Rng::mix(h ^ v) * 0x100000001b3ULL; };
  for (const auto& s : subjects) {
    feed(Rng::hash(s.id));
    feed(static_cast<std::uint64_t>(s.label));
    for (double v : s.timecourses.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      feed(bits);
    }
  }
  return h;
}

void zscore_columns(Tensor& x) {
  const std::size_t t = x.dim(0), n = x.dim(1);
  for (std::size_t j = 0; j < n; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < t; ++i) mean += x(i, j);
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t i = 0; i < t; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(t);
    const double sd = std::sqrt(var);
    // relative tolerance: a column is constant if its spread is at rounding level
    const bool constant = sd <= 1e-12 * std::max(1.0, std::abs(mean));
    for (std::size_t i = 0; i < t; ++i) x(i, j) = constant ? 0.0 : (x(i, j) - mean) / sd;
  }
}

TimeSeriesDataset load_dataset(const std::filesystem::path& manifest) {
  if (!std::filesystem::exists(manifest)) throw IngestionError("manifest not found: " + manifest.string());
  const csv::Table table = csv::read_table(manifest);
  const std::size_t c_id = table.column("subject_id");
  const std::size_t c_label = table.column("label");
  const std::size_t c_site = table.column("site");
  const std::size_t c_path = table.column("path");
  const auto base = manifest.parent_path();

  TimeSeriesDataset ds;
  ds.metadata.source = manifest.string();
  for (const auto& row : table.rows) {
    Subject s;
    s.id = row[c_id];
    if (row[c_label] == "0") {
      s.label = 0;
    } else if (row[c_label] == "1") {
      s.label = 1;
    } else {
      throw DataError("subject " + s.id + ": label '" + row[c_label] + "' is not 0 or 1");
    }
    s.site = row[c_site];
    const auto path = base / row[c_path];
    if (!std::filesystem::exists(path)) {
      throw IngestionError("subject " + s.id + ": missing time-series file " + path.string());
    }
    try {
      s.timecourses = csv::read_matrix(path);
    } catch (const IngestionError& e) {
      throw IngestionError("subject " + s.id + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("subject " + s.id + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("subject " + s.id + ": " + e.what());
    }
    if (ds.subjects.empty()) {
      ds.num_rois = s.num_rois();
    } else if (s.num_rois() != ds.num_rois) {
      throw SchemaError("subject " + s.id + " has " + std::to_string(s.num_rois()) + " columns, expected " +
                        std::to_string(ds.num_rois));
    }
    zscore_columns(s.timecourses);
    ds.subjects.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

std::filesystem::path write_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  csv::Table manifest;
  manifest.header = {"subject_id", "label", "site", "path"};
  for (const auto& s : dataset.subjects) {
    const std::string file = s.id + ".csv";
    csv::write_matrix(dir / file, s.timecourses);
    manifest.rows.push_back({s.id, std::to_string(s.label), s.site, file});
  }
  const auto path = dir / "manifest.csv";
  csv::write_table(path, manifest);
  return path;
}

}  // namespace braingraph
