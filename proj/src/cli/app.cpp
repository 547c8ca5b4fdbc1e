#include "braingraph/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>

#include "braingraph/cli/plot.hpp"
#include "braingraph/datasets/csv.hpp"
#include "braingraph/datasets/synthetic.hpp"
#include "braingraph/errors.hpp"
#include "braingraph/experiments/report.hpp"
#include "braingraph/experiments/studies.hpp"

namespace braingraph {

namespace {

namespace fs = std::filesystem;

constexpr const char* kRangeHelp = "start:stop:step (stop included when reached exactly) or a comma list";

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Ordered key/value rows of run_meta.csv.
struct RunMeta {
  std::vector<std::pair<std::string, std::string>> rows;
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : rows)
      if (k == key) {
        v = value;
        return;
      }
    rows.emplace_back(key, value);
  }
  void write(const fs::path& path) const {
    csv::Table t;
    t.header = {"key", "value"};
    for (const auto& [k, v] : rows) {
      std::string cell = v;
      std::replace(cell.begin(), cell.end(), ',', ';');
      t.rows.push_back({k, cell});
    }
    csv::write_table(path, t);
  }
};

using Job = std::function<void(const fs::path& out, RunMeta& meta)>;

struct Global {
  std::uint64_t seed = 0;
  std::string out = "braingraph_out";
  std::string config;
  std::size_t jobs = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
};

// Flags shared by the verbs that train models.
struct ModelFlags {
  std::string manifest;
  std::string family = "gcn";
  std::vector<std::string> sets;
  std::vector<std::string> grid;
  CLI::Option* manifest_opt = nullptr;
  CLI::Option* family_opt = nullptr;

  void attach(CLI::App* sub, bool with_grid) {
    manifest_opt = sub->add_option("--manifest", manifest, "Dataset manifest CSV (subject_id,label,site,path)");
    family_opt = sub->add_option("--family", family, "Model family: gcn gat gin stgcn astgcn mlp cnn1d svm_rbf")
                     ->capture_default_str();
    sub->add_option("--set", sets, "Fixed hyperparameter key=value (repeatable)");
    if (with_grid) sub->add_option("--grid", grid, "Grid axis key=v1,v2,... (repeatable)");
  }
};

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigurationError("expected key=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::size_t to_size(const std::string& what, double v) {
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw ConfigurationError(what + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigurationError(key + ": expected true or false, got '" + v + "'");
}

// Settings resolved from defaults, the config file and flags, in increasing precedence.
struct Experiment {
  fs::path manifest;
  RunConfig run;
  HyperGrid grid;
  std::size_t folds = 5;
  double selection_fraction = kValidationFraction;
  bool reuse_selection = false;
  std::string name;
};

const std::map<std::string, std::string>& section(const IniFile& ini, const std::string& name) {
  static const std::map<std::string, std::string> empty;
  auto it = ini.find(name);
  return it == ini.end() ? empty : it->second;
}

void reject_unknown(const IniFile& ini) {
  static const std::set<std::string> known = {"dataset", "experiment", "model", "grid", "output"};
  for (const auto& [name, values] : ini) {
    if (!known.contains(name)) throw ConfigurationError("config: unknown section [" + name + "]");
  }
}

Experiment resolve(const IniFile& ini, const fs::path& config_dir, const ModelFlags& flags, const std::string& verb) {
  Experiment e;
  e.name = verb;
  reject_unknown(ini);
  for (const auto& [k, v] : section(ini, "dataset")) {
    if (k != "manifest") throw ConfigurationError("config: unknown key dataset." + k);
    const fs::path p = v;
    e.manifest = p.is_relative() ? config_dir / p : p;
  }
  std::string family = flags.family;
  for (const auto& [k, v] : section(ini, "experiment")) {
    if (k == "family") {
      if (!flags.family_opt->count()) family = v;
    } else if (k == "name") {
      e.name = v;
    } else if (k == "folds") {
      e.folds = to_size(k, csv::parse_double(v));
    } else if (k == "selection_fraction") {
      e.selection_fraction = csv::parse_double(v);
    } else if (k == "reuse_val_in_cv") {
      e.reuse_selection = parse_bool(k, v);
    } else if (k != "seed" && k != "jobs") {
      throw ConfigurationError("config: unknown key experiment." + k);
    }
  }
  if (flags.manifest_opt->count()) e.manifest = flags.manifest;
  if (e.manifest.empty()) throw ConfigurationError("no dataset: pass --manifest or set [dataset] manifest");
  e.run = default_run_config(parse_family(family));
  for (const auto& [k, v] : section(ini, "model")) e.run.set(k, v);
  for (const auto& s : flags.sets) {
    const auto [k, v] = split_assignment(s);
    e.run.set(k, v);
  }
  e.run.validate();
  for (const auto& [k, v] : section(ini, "grid")) e.grid.set_axis(k, split_list(v));
  for (const auto& g : flags.grid) {
    const auto [k, v] = split_assignment(g);
    e.grid.set_axis(k, split_list(v));
  }
  if (!(e.selection_fraction > 0.0 && e.selection_fraction < 1.0)) {
    throw ConfigurationError("selection_fraction must lie in (0, 1)");
  }
  if (e.folds < 2) throw ConfigurationError("folds must be at least 2");
  return e;
}

TimeSeriesDataset load(const fs::path& manifest, RunMeta& meta) {
  TimeSeriesDataset ds = load_dataset(manifest);
  meta.set("dataset_hash", hex(ds.content_hash()));
  meta.set("dataset_subjects", std::to_string(ds.size()));
  return ds;
}

void write_reports(const fs::path& out, const std::vector<FoldRow>& rows) {
  write_fold_report(out / "report_folds.csv", rows);
  write_summary(out / "report_summary.csv", summarize(rows));
}

void write_audit(const fs::path& path, const ProtocolAudit& audit) {
  csv::Table t;
  t.header = {"key", "value"};
  t.rows.push_back({"sets_checked", std::to_string(audit.sets_checked)});
  t.rows.push_back({"overlaps", std::to_string(audit.overlaps)});
  t.rows.push_back({"clean", audit.clean() ? "true" : "false"});
  for (const auto& f : audit.findings) t.rows.push_back({"finding", f});
  csv::write_table(path, t);
}

void write_search(const fs::path& out, const SearchResult& search) {
  csv::Table t;
  t.header = {"index", "assignment", "val_loss", "best_epoch", "status"};
  for (const auto& p : search.points) {
    t.rows.push_back({std::to_string(p.index), format_assignment(p.assignment),
                      p.aborted() ? "" : csv::format_double(p.val_loss), std::to_string(p.best_epoch),
                      p.aborted() ? "aborted" : (p.index == search.best ? "best" : "ok")});
  }
  csv::write_table(out / "search.csv", t);
  csv::Table best;
  best.header = {"key", "value"};
  for (const auto& [k, v] : search.config.to_map()) best.rows.push_back({k, v});
  csv::write_table(out / "best_config.csv", best);
}

// ---- verbs ---------------------------------------------------------------------------------

struct SynthFlags {
  SyntheticConfig cfg;
};

Job plan_synth(const SynthFlags& f, const Global& g) {
  SyntheticConfig cfg = f.cfg;
  cfg.seed = g.seed;
  cfg.validate();
  return [cfg](const fs::path& out, RunMeta& meta) {
    const SyntheticData data = generate_synthetic(cfg);
    write_synthetic(data, cfg, out);
    meta.set("dataset_hash", hex(data.dataset.content_hash()));
  };
}

struct FcFlags {
  std::string manifest;
  double keep = 0.2;
  std::string diffusion = "none";
  double t = 1.0;
  double alpha = 0.15;
  std::string transition = "sym";
  std::size_t order = 2;
  std::vector<std::string> subjects;
};

Job plan_fc(const FcFlags& f) {
  GraphOptions opt;
  opt.keep_fraction = f.keep;
  opt.diffusion.scheme = parse_diffusion_scheme(f.diffusion);
  opt.diffusion.t = f.t;
  opt.diffusion.alpha = f.alpha;
  opt.diffusion.transition = parse_transition(f.transition);
  opt.diffusion.order = f.order;
  opt.diffusion.validate();
  if (!(opt.keep_fraction > 0.0 && opt.keep_fraction <= 1.0)) throw ConfigurationError("--keep must lie in (0, 1]");
  return [f, opt](const fs::path& out, RunMeta& meta) {
    const TimeSeriesDataset ds = load(f.manifest, meta);
    std::size_t written = 0;
    for (const auto& s : ds.subjects) {
      if (!f.subjects.empty() && std::find(f.subjects.begin(), f.subjects.end(), s.id) == f.subjects.end()) continue;
      dump_graph(build_static_graph(s, opt), s.id, out / "graphs");
      ++written;
    }
    if (!f.subjects.empty() && written != f.subjects.size()) {
      throw DataError("some requested subjects are not in the dataset");
    }
  };
}

struct TrainFlags {
  ModelFlags model;
  double val_fraction = kValidationFraction;
};

Job plan_train(const TrainFlags& f, const Global& g, const IniFile& ini, const fs::path& config_dir) {
  const Experiment e = resolve(ini, config_dir, f.model, "train");
  if (!(f.val_fraction > 0.0 && f.val_fraction < 1.0)) throw ConfigurationError("--val-fraction must lie in (0, 1)");
  const std::uint64_t seed = g.seed;
  const double val_fraction = f.val_fraction;
  return [e, seed, val_fraction](const fs::path& out, RunMeta& meta) {
    const TimeSeriesDataset ds = load(e.manifest, meta);
    GraphCache cache(ds);
    const auto labels = ds.labels();
    IndexList all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Rng root(seed);
    const auto [train, val] = stratified_holdout(labels, all, val_fraction, root.stream("split").key());
    const auto graphs = cache.graphs(e.run);
    const TrainedModel model = train_model(e.run, *graphs, train, val, root.stream("train").key());
    save_checkpoint(model, out / "checkpoint");
    csv::Table t;
    t.header = {"split", "subjects", "loss", "bal_acc", "sens", "spec"};
    for (const auto& [name, idx] : {std::pair{"train", &train}, std::pair{"validation", &val}}) {
      const Metrics m = compute_metrics(evaluate(model, *graphs, *idx));
      t.rows.push_back({name, std::to_string(idx->size()), csv::format_double(mean_loss(model, *graphs, *idx)),
                        csv::format_double(m.balanced_accuracy), csv::format_double(m.sensitivity),
                        csv::format_double(m.specificity)});
    }
    csv::write_table(out / "train_summary.csv", t);
  };
}

struct SearchFlags {
  ModelFlags model;
  double val_fraction = kValidationFraction;
};

Job plan_search(const SearchFlags& f, const Global& g, const IniFile& ini, const fs::path& config_dir) {
  Experiment e = resolve(ini, config_dir, f.model, "search");
  if (e.grid.size() == 0 || e.grid.axes().empty()) throw ConfigurationError("search needs at least one --grid axis");
  const std::uint64_t seed = g.seed;
  const std::size_t jobs = g.jobs;
  const double val_fraction = f.val_fraction;
  return [e, seed, jobs, val_fraction](const fs::path& out, RunMeta& meta) {
    const TimeSeriesDataset ds = load(e.manifest, meta);
    GraphCache cache(ds);
    IndexList all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Rng root(seed);
    const auto [train, val] = stratified_holdout(ds.labels(), all, val_fraction, root.stream("split").key());
    write_search(out, grid_search(e.run, e.grid, cache, train, val, root.stream("search").key(), jobs));
  };
}

struct CvFlags {
  ModelFlags model;
  std::size_t folds = 5;
  double selection_fraction = kValidationFraction;
  bool reuse_selection = false;
  CLI::Option* folds_opt = nullptr;
  CLI::Option* selection_opt = nullptr;
  CLI::Option* reuse_opt = nullptr;
};

Job plan_cv(const CvFlags& f, const Global& g, const IniFile& ini, const fs::path& config_dir) {
  Experiment e = resolve(ini, config_dir, f.model, "cv");
  if (f.folds_opt->count()) e.folds = f.folds;
  if (f.selection_opt->count()) e.selection_fraction = f.selection_fraction;
  if (f.reuse_opt->count()) e.reuse_selection = f.reuse_selection;
  if (e.folds < 2) throw ConfigurationError("--folds must be at least 2");
  const std::uint64_t seed = g.seed;
  const std::size_t jobs = g.jobs;
  return [e, seed, jobs](const fs::path& out, RunMeta& meta) {
    const TimeSeriesDataset ds = load(e.manifest, meta);
    GraphCache cache(ds);
    CvOptions cv;
    cv.folds = e.folds;
    cv.seed = seed;
    cv.jobs = jobs;
    cv.experiment = e.name;
    if (e.grid.axes().empty()) {
      const ExperimentReport report = cross_validate(e.run, cache, cv);
      write_reports(out, fold_rows(report));
      ProtocolResult as_protocol;
      as_protocol.report = report;
      write_audit(out / "audit.csv", audit_protocol(as_protocol));
      return;
    }
    ProtocolOptions opt;
    opt.cv = cv;
    opt.selection_fraction = e.selection_fraction;
    opt.reuse_selection_in_cv = e.reuse_selection;
    const ProtocolResult res = run_protocol(e.run, e.grid, cache, opt);
    write_search(out, res.search);
    const ProtocolAudit audit = audit_protocol(res);
    write_audit(out / "audit.csv", audit);
    write_reports(out, fold_rows(res.report));
    if (!audit.clean() && !e.reuse_selection) throw ContractError("protocol audit found test leakage");
  };
}

struct ScaleFlags {
  ModelFlags model;
  std::string families = "gcn,gat,gin,stgcn,astgcn,mlp,cnn1d,svm_rbf";
  std::string sizes = "100,200,400,800,1600";
  std::size_t test_size = 200;
  std::size_t repeats = 1;
};

Job plan_scale(const ScaleFlags& f, const Global& g, const IniFile& ini, const fs::path& config_dir) {
  const Experiment base = resolve(ini, config_dir, f.model, "scale");
  std::vector<RunConfig> configs;
  for (const auto& name : split_list(f.families)) {
    RunConfig c = base.run;
    const auto model_map = c.model.to_map();
    auto m = model_map;
    m["family"] = name;
    c.model = ModelSpec::from_map(m);
    c.validate();
    configs.push_back(c);
  }
  if (configs.empty()) throw ConfigurationError("--families is empty");
  std::vector<std::size_t> sizes;
  for (double v : parse_range(f.sizes)) sizes.push_back(to_size("--sizes", v));
  if (f.repeats == 0) throw ConfigurationError("--repeats must be positive");
  const std::uint64_t seed = g.seed;
  const std::size_t jobs = g.jobs, test_size = f.test_size, repeats = f.repeats;
  return [base, configs, sizes, seed, jobs, test_size, repeats](const fs::path& out, RunMeta& meta) {
    const TimeSeriesDataset ds = load(base.manifest, meta);
    GraphCache cache(ds);
    std::vector<ScalingPoint> all;
    for (std::size_t r = 0; r < repeats; ++r) {
      ScalingOptions opt;
      opt.sizes = sizes;
      opt.test_size = test_size;
      opt.seed = seed + r;
      opt.jobs = jobs;
      const auto pts = scaling_study(configs, cache, opt);
      all.insert(all.end(), pts.begin(), pts.end());
    }
    write_scaling_table(out / "scaling.csv", all);
    std::vector<PlotSeries> series;
    for (const auto& c : configs) {
      PlotSeries s{to_string(c.model.family), {}, {}, {}};
      for (std::size_t size : sizes) {
        std::vector<double> acc;
        for (const auto& p : all)
          if (p.family == c.model.family && p.train_size == size && !p.aborted()) acc.push_back(p.metrics.balanced_accuracy);
        if (acc.empty()) continue;
        const MeanStd ms = mean_std(acc);
        s.x.push_back(static_cast<double>(size));
        s.y.push_back(ms.mean);
        s.err.push_back(ms.std);
      }
      if (!s.x.empty()) series.push_back(s);
    }
    if (series.empty()) throw TrainingError("every scaling run aborted");
    emit_plot(out / "scaling.svg", series, {"Scaling with training set size", "training subjects", "balanced accuracy"});
  };
}

struct SweepFlags {
  ModelFlags model;
  std::string fractions = "0.05:0.5:0.05";
  std::string diffusion = "both";
  std::size_t folds = 5;
};

Job plan_sweep(const SweepFlags& f, const Global& g, const IniFile& ini, const fs::path& config_dir) {
  const Experiment e = resolve(ini, config_dir, f.model, "sweep");
  SweepOptions opt;
  opt.keep_fractions = parse_range(f.fractions);
  for (double k : opt.keep_fractions)
    if (!(k > 0.0 && k <= 1.0)) throw ConfigurationError("--fractions values must lie in (0, 1]");
  DiffusionConfig heat = DiffusionConfig::heat_kernel(1.0, 2);
  if (f.diffusion == "none") {
    opt.arms = {{"none", {}}};
  } else if (f.diffusion == "heat") {
    opt.arms = {{"heat", heat}};
  } else if (f.diffusion == "both") {
    opt.arms = {{"none", {}}, {"heat", heat}};
  } else {
    throw ConfigurationError("--diffusion must be none, heat or both");
  }
  if (f.folds < 2) throw ConfigurationError("--folds must be at least 2");
  opt.cv.folds = f.folds;
  opt.cv.seed = g.seed;
  opt.cv.jobs = g.jobs;
  return [e, opt](const fs::path& out, RunMeta& meta) {
    const TimeSeriesDataset ds = load(e.manifest, meta);
    GraphCache cache(ds);
    const auto cells = threshold_sweep(e.run, cache, opt);
    write_sweep_table(out / "sweep.csv", cells);
    std::vector<FoldRow> rows;
    std::vector<PlotSeries> series;
    for (const auto& cell : cells) {
      ExperimentReport r = cell.report;
      r.experiment = "sweep:" + cell.arm + ":keep=" + csv::format_double(cell.keep_fraction);
      const auto fr = fold_rows(r);
      rows.insert(rows.end(), fr.begin(), fr.end());
      if (series.empty() || series.back().name != cell.arm) series.push_back({cell.arm, {}, {}, {}});
      if (cell.summary.completed == 0) continue;
      series.back().x.push_back(cell.keep_fraction);
      series.back().y.push_back(cell.summary.balanced_accuracy.mean);
      series.back().err.push_back(cell.summary.balanced_accuracy.std);
    }
    write_fold_report(out / "report_folds.csv", rows);
    std::erase_if(series, [](const PlotSeries& s) { return s.x.empty(); });
    if (series.empty()) throw TrainingError("every sweep run aborted");
    emit_plot(out / "sweep.svg", series, {"Threshold sweep", "keep fraction", "balanced accuracy"});
  };
}

struct ReportFlags {
  std::string folds;
  std::string check;
};

Job plan_report(const ReportFlags& f) {
  if (f.folds.empty()) throw ConfigurationError("report needs --folds <report_folds.csv>");
  return [f](const fs::path& out, RunMeta&) {
    const auto rows = read_fold_report(f.folds);
    const auto summary = summarize(rows);
    write_summary(out / "report_summary.csv", summary);
    if (f.check.empty()) return;
    const auto stored = read_summary(f.check);
    bool same = stored.size() == summary.size();
    for (std::size_t i = 0; same && i < stored.size(); ++i) {
      same = stored[i].family == summary[i].family && stored[i].metric == summary[i].metric &&
             std::abs(stored[i].mean - summary[i].mean) <= 1e-12 && std::abs(stored[i].std - summary[i].std) <= 1e-12;
    }
    if (!same) throw DataError(f.check + " does not match the summary recomputed from " + f.folds);
  };
}

void record_flags(const CLI::App* app, const std::string& prefix, RunMeta& meta) {
  for (const CLI::Option* opt : app->get_options()) {
    if (opt == app->get_help_ptr() || opt == app->get_help_all_ptr()) continue;
    const std::string name = opt->get_name();
    std::string value;
    if (opt->count()) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : "|") + r;
    } else {
      value = opt->get_default_str();
    }
    std::string key = name;
    key.erase(0, key.find_first_not_of('-'));
    meta.set(prefix + key, value);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Brain-graph classification pipeline: synthetic data, graph construction, model training and evaluation."};
  app.name("braingraph");
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kArtifactVersion);
  Global g;
  g.seed_opt = app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  g.out_opt = app.add_option("--out", g.out, "Output directory")->envname("BRAINGRAPH_OUT")->capture_default_str();
  app.add_option("--config", g.config, "Experiment config (INI; see README)")->check(CLI::ExistingFile);
  g.jobs_opt = app.add_option("--jobs", g.jobs, "Worker threads; results do not depend on it")
                   ->check(CLI::PositiveNumber)
                   ->capture_default_str();

  SynthFlags synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic two-class VAR(1) dataset");
  s_synth->add_option("--subjects", synth.cfg.num_subjects)->capture_default_str();
  s_synth->add_option("--rois", synth.cfg.num_rois)->capture_default_str();
  s_synth->add_option("--timepoints", synth.cfg.num_timepoints)->capture_default_str();
  s_synth->add_option("--effect", synth.cfg.effect, "Scale of the class-1 coupling")->capture_default_str();
  s_synth->add_option("--noise", synth.cfg.noise_std)->capture_default_str();
  s_synth->add_option("--density", synth.cfg.density, "Share of pairs in the shared coupling")->capture_default_str();
  s_synth->add_option("--planted-fraction", synth.cfg.planted_fraction)->capture_default_str();
  s_synth->add_option("--planted-scale", synth.cfg.planted_scale)->capture_default_str();
  s_synth->add_option("--spectral-radius", synth.cfg.spectral_radius)->capture_default_str();

  FcFlags fc;
  auto* s_fc = app.add_subcommand("fc", "Write thresholded (and optionally diffused) FC graphs");
  s_fc->add_option("--manifest", fc.manifest, "Dataset manifest CSV")->required();
  s_fc->add_option("--keep", fc.keep, "Keep fraction of node pairs")->capture_default_str();
  s_fc->add_option("--diffusion", fc.diffusion, "none, heat or ppr")->capture_default_str();
  s_fc->add_option("--t", fc.t, "Heat kernel time")->capture_default_str();
  s_fc->add_option("--alpha", fc.alpha, "PageRank teleport probability")->capture_default_str();
  s_fc->add_option("--transition", fc.transition, "sym or rw")->capture_default_str();
  s_fc->add_option("--order", fc.order, "Truncation order K")->capture_default_str();
  s_fc->add_option("--subject", fc.subjects, "Only these subject ids (repeatable)");

  TrainFlags train;
  auto* s_train = app.add_subcommand("train", "Train one model on a stratified train/validation split");
  train.model.attach(s_train, false);
  s_train->add_option("--val-fraction", train.val_fraction)->capture_default_str();

  SearchFlags search;
  auto* s_search = app.add_subcommand("search", "Grid search on a stratified train/validation split");
  search.model.attach(s_search, true);
  s_search->add_option("--val-fraction", search.val_fraction)->capture_default_str();

  CvFlags cv;
  auto* s_cv = app.add_subcommand("cv", "Stratified k-fold cross-validation, after a grid search when a grid is given");
  cv.model.attach(s_cv, true);
  cv.folds_opt = s_cv->add_option("--folds", cv.folds)->capture_default_str();
  cv.selection_opt = s_cv->add_option("--selection-fraction", cv.selection_fraction,
                                      "Stratified share reserved for the grid search")
                         ->capture_default_str();
  cv.reuse_opt = s_cv->add_flag("--reuse-val-in-cv", cv.reuse_selection, "Return the selection slice to the CV pool");

  ScaleFlags scale;
  auto* s_scale = app.add_subcommand("scale", "Accuracy against training set size on a fixed test set");
  scale.model.attach(s_scale, false);
  s_scale->add_option("--families", scale.families, "Comma list of families")->capture_default_str();
  s_scale->add_option("--sizes", scale.sizes, std::string("Training sizes: ") + kRangeHelp)->capture_default_str();
  s_scale->add_option("--test-size", scale.test_size)->capture_default_str();
  s_scale->add_option("--repeats", scale.repeats, "Seeds seed, seed+1, ...")->capture_default_str();

  SweepFlags sweep;
  auto* s_sweep = app.add_subcommand("sweep", "Cross-validation across keep fractions with and without diffusion");
  sweep.model.attach(s_sweep, false);
  s_sweep->add_option("--fractions", sweep.fractions, std::string("Keep fractions: ") + kRangeHelp)->capture_default_str();
  s_sweep->add_option("--diffusion", sweep.diffusion, "none, heat or both")->capture_default_str();
  s_sweep->add_option("--folds", sweep.folds)->capture_default_str();

  ReportFlags report;
  auto* s_report = app.add_subcommand("report", "Recompute report_summary.csv from report_folds.csv");
  s_report->add_option("--folds", report.folds, "report_folds.csv to summarize");
  s_report->add_option("--check", report.check, "Existing report_summary.csv that must match");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << kArtifactVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "braingraph: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) err << "run with --help for usage\n";
    return kExitUsage;
  }

  CLI::App* verb = app.get_subcommands().front();
  Job job;
  fs::path out_dir;
  try {
    IniFile ini;
    fs::path config_dir = ".";
    if (!g.config.empty()) {
      ini = read_ini(g.config);
      config_dir = fs::path(g.config).parent_path();
      if (config_dir.empty()) config_dir = ".";
      const auto& exp = section(ini, "experiment");
      if (!g.seed_opt->count() && exp.contains("seed")) g.seed = static_cast<std::uint64_t>(csv::parse_double(exp.at("seed")));
      if (!g.jobs_opt->count() && exp.contains("jobs")) g.jobs = to_size("jobs", csv::parse_double(exp.at("jobs")));
      const auto& output = section(ini, "output");
      for (const auto& [k, v] : output)
        if (k != "dir") throw ConfigurationError("config: unknown key output." + k);
      if (!g.out_opt->count() && output.contains("dir")) {
        const fs::path p = output.at("dir");
        g.out = (p.is_relative() ? config_dir / p : p).string();
      }
    }
    if (g.jobs == 0) throw ConfigurationError("--jobs must be positive");
    const std::string name = verb->get_name();
    if (name == "synth") {
      job = plan_synth(synth, g);
    } else if (name == "fc") {
      job = plan_fc(fc);
    } else if (name == "train") {
      job = plan_train(train, g, ini, config_dir);
    } else if (name == "search") {
      job = plan_search(search, g, ini, config_dir);
    } else if (name == "cv") {
      job = plan_cv(cv, g, ini, config_dir);
    } else if (name == "scale") {
      job = plan_scale(scale, g, ini, config_dir);
    } else if (name == "sweep") {
      job = plan_sweep(sweep, g, ini, config_dir);
    } else {
      job = plan_report(report);
    }
    out_dir = g.out;
    if (out_dir.empty()) throw ConfigurationError("--out is empty");
  } catch (const std::exception& e) {
    err << "braingraph " << verb->get_name() << ": " << e.what() << '\n';
    return kExitUsage;
  }

  RunMeta meta;
  meta.set("verb", verb->get_name());
  meta.set("artifact_version", kArtifactVersion);
  meta.set("seed", std::to_string(g.seed));
  meta.set("jobs", std::to_string(g.jobs));
  meta.set("out", out_dir.string());
  meta.set("config", g.config);
  meta.set("dataset_hash", "");
  record_flags(verb, "flag.", meta);
  meta.set("status", "running");

  try {
    fs::create_directories(out_dir);
    fs::remove(out_dir / ".failed");
    job(out_dir, meta);
    meta.set("status", "ok");
    meta.write(out_dir / "run_meta.csv");
    return kExitOk;
  } catch (const std::exception& e) {
    err << "braingraph " << verb->get_name() << ": " << e.what() << '\n';
    try {
      fs::create_directories(out_dir);
      std::ofstream marker(out_dir / ".failed");
      marker << e.what() << '\n';
      meta.set("status", "failed");
      meta.write(out_dir / "run_meta.csv");
    } catch (const std::exception&) {
    }
    return kExitRuntime;
  }
}

}  // namespace braingraph
