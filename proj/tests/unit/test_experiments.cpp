#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "braingraph/cli/plot.hpp"
#include "braingraph/datasets/synthetic.hpp"
#include "braingraph/errors.hpp"
#include "braingraph/experiments/report.hpp"
#include "braingraph/experiments/studies.hpp"
#include "support/tasks.hpp"
#include "support/tempdir.hpp"

using namespace braingraph;
using namespace braingraph::testing;

namespace {

SyntheticData small_synthetic(std::uint64_t seed, std::size_t subjects = 80) {
  SyntheticConfig c;
  c.num_subjects = subjects;
  c.num_rois = 8;
  c.num_timepoints = 60;
  c.seed = seed;
  return generate_synthetic(c);
}

RunConfig quick(Family f) {
  RunConfig c = default_run_config(f);
  c.model.hidden_dim = 4;
  c.model.num_layers = 1;
  c.model.embedding_dim = 3;
  c.train.max_epochs = 8;
  c.train.patience = 3;
  c.train.learning_rate = 1e-2;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("compute_metrics examples") {
  const Metrics m = compute_metrics({5, 2, 8, 5});
  CHECK(m.balanced_accuracy == doctest::Approx(0.65).epsilon(1e-15));
  CHECK(m.sensitivity == 0.5);
  CHECK(m.specificity == 0.8);
  const Metrics perfect = compute_metrics({7, 0, 9, 0});
  CHECK(perfect.balanced_accuracy == 1.0);
  CHECK(perfect.sensitivity == 1.0);
  CHECK(perfect.specificity == 1.0);
  const Metrics all_pos = compute_metrics({10, 10, 0, 0});
  CHECK(all_pos.balanced_accuracy == 0.5);
  CHECK(all_pos.sensitivity == 1.0);
  CHECK(all_pos.specificity == 0.0);
  CHECK_THROWS_AS(compute_metrics({0, 3, 3, 0}), MetricError);
  CHECK_THROWS_AS(compute_metrics({3, 0, 0, 3}), MetricError);

  Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const Confusion c{1 + rng.below(30), rng.below(30), 1 + rng.below(30), rng.below(30)};
    const Metrics r = compute_metrics(c);
    CHECK(r.balanced_accuracy == (r.sensitivity + r.specificity) / 2.0);
    CHECK(r.balanced_accuracy >= 0.0);
    CHECK(r.balanced_accuracy <= 1.0);
  }
  const std::vector<int> truth = {1, 1, 0, 0, 1}, pred = {1, 0, 0, 1, 1};
  CHECK(confusion(truth, pred) == Confusion{2, 1, 1, 1});
}

TEST_CASE("mean and sample standard deviation") {
  const std::vector<double> v = {1, 2, 3, 4};
  const MeanStd ms = mean_std(v);
  CHECK(ms.mean == 2.5);
  CHECK(ms.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(mean_std(std::vector<double>{0.7}).std == 0.0);
}

TEST_CASE("hyperparameter grid enumeration") {
  HyperGrid g({{"lr", {"0.1", "0.01"}}, {"hidden_dim", {"4", "8", "16"}}});
  CHECK(g.size() == 6);
  // keys sorted: hidden_dim, lr; the last varies fastest
  CHECK(g.point(0) == std::map<std::string, std::string>{{"hidden_dim", "4"}, {"lr", "0.1"}});
  CHECK(g.point(1) == std::map<std::string, std::string>{{"hidden_dim", "4"}, {"lr", "0.01"}});
  CHECK(g.point(5) == std::map<std::string, std::string>{{"hidden_dim", "16"}, {"lr", "0.01"}});
  std::set<std::string> seen;
  for (std::size_t i = 0; i < g.size(); ++i) seen.insert(format_assignment(g.point(i)));
  CHECK(seen.size() == 6);
  CHECK_THROWS_AS(g.set_axis("lr", {}), ConfigurationError);
  CHECK_THROWS_AS(g.set_axis("bogus", {"1"}), ConfigurationError);
  CHECK_THROWS_AS(g.set_axis("readout", {"median"}), ConfigurationError);
  for (Family f : all_families()) {
    const HyperGrid d = HyperGrid::defaults(f);
    CHECK(d.size() > 0);
    for (std::size_t i = 0; i < d.size(); i += 37) with_assignment(default_run_config(f), d.point(i)).validate();
  }
  CHECK(HyperGrid::defaults(Family::svm_rbf).size() == 12);
}

TEST_CASE("run config keys round-trip") {
  RunConfig c = default_run_config(Family::gat);
  c.set("lr", "0.005");
  c.set("keep_fraction", "0.3");
  c.set("diffusion", "heat");
  c.set("transition", "rw");
  c.set("heads", "4");
  RunConfig back = default_run_config(Family::gcn);
  for (const auto& [k, v] : c.to_map()) back.set(k, v);
  CHECK(back.to_map() == c.to_map());
  CHECK_THROWS_AS(c.set("lr", "fast"), ConfigurationError);
  CHECK_THROWS_AS(c.set("max_epochs", "1.5"), ConfigurationError);
  c.set("keep_fraction", "1.5");
  CHECK_THROWS_AS(c.validate(), ConfigurationError);
}

TEST_CASE("ini and range parsing") {
  const IniFile ini = parse_ini("# comment\n[dataset]\nmanifest = data/manifest.csv\n\n[grid]\nlr = 0.1, 0.01\n; more\n");
  CHECK(ini.at("dataset").at("manifest") == "data/manifest.csv");
  CHECK(split_list(ini.at("grid").at("lr")) == std::vector<std::string>{"0.1", "0.01"});
  CHECK_THROWS_AS(parse_ini("[a\nk=v"), ConfigurationError);
  CHECK_THROWS_AS(parse_ini("[a]\nnovalue"), ConfigurationError);
  CHECK_THROWS_AS(parse_ini("[a]\nk=1\nk=2"), ConfigurationError);

  const auto r = parse_range("0.05:0.50:0.05");
  REQUIRE(r.size() == 10);
  CHECK(r.front() == 0.05);
  CHECK(r[2] == 0.15);
  CHECK(r.back() == 0.5);
  CHECK(parse_range("100:1600:500") == std::vector<double>{100, 600, 1100, 1600});
  CHECK(parse_range("1:10:4") == std::vector<double>{1, 5, 9});
  CHECK(parse_range("0.3") == std::vector<double>{0.3});
  CHECK(parse_range("1,2,4") == std::vector<double>{1, 2, 4});
  CHECK_THROWS_AS(parse_range("1:0:1"), ConfigurationError);
  CHECK_THROWS_AS(parse_range("0:1:0"), ConfigurationError);
}

TEST_CASE("mlp fits a linearly separable task") {
  Rng rng(2);
  const GraphSet graphs = separable_static_graphs(120, 5, rng);
  RunConfig c = default_run_config(Family::mlp);
  c.model.hidden_dim = 8;
  c.train.learning_rate = 1e-2;
  c.train.patience = 200;
  const TrainedModel m = train_model(c, graphs, iota_list(0, 100), iota_list(100, 120), 5);
  CHECK(mean_loss(m, graphs, iota_list(0, 100)) < 0.01);
  CHECK(compute_metrics(evaluate(m, graphs, iota_list(100, 120))).balanced_accuracy == 1.0);
}

TEST_CASE("training contracts") {
  Rng rng(3);
  const GraphSet graphs = separable_static_graphs(60, 5, rng);
  RunConfig c = quick(Family::gcn);
  c.train.max_epochs = 30;
  const IndexList train = iota_list(0, 40), val = iota_list(40, 60);
  const TrainedModel a = train_model(c, graphs, train, val, 9);
  const TrainedModel b = train_model(c, graphs, train, val, 9);
  for (const auto& p : a.parameters) CHECK(p.value == b.parameters.get(p.name).value);
  CHECK(a.history.size() == b.history.size());

  // the carried checkpoint is the best validation epoch
  CHECK(best_validation_loss(a) <= a.history.back().val_loss);
  for (const auto& e : a.history) CHECK(best_validation_loss(a) <= e.val_loss);
  CHECK(std::abs(mean_loss(a, graphs, val) - best_validation_loss(a)) < 1e-12);
  // early stopping bounds the number of epochs past the best one
  CHECK(a.history.back().epoch - a.best_epoch <= c.train.patience);

  c.model.dropout = 0.3;
  const TrainedModel d1 = train_model(c, graphs, train, val, 9);
  const TrainedModel d2 = train_model(c, graphs, train, val, 9);
  CHECK(d1.parameters.get("head.W").value == d2.parameters.get("head.W").value);

  CHECK_THROWS_AS(train_model(c, graphs, train, iota_list(39, 45), 1), ContractError);
  CHECK_THROWS_AS(train_model(c, graphs, {0, 2, 4}, val, 1), ContractError);
  CHECK_THROWS_AS(train_model(c, graphs, train, {}, 1), ContractError);

  RunConfig diverge = c;
  diverge.train.learning_rate = 1e300;
  CHECK_THROWS_AS(train_model(diverge, graphs, train, val, 1), TrainingError);
}

TEST_CASE("svm trains through the common entry point") {
  Rng rng(4);
  const GraphSet graphs = separable_static_graphs(60, 5, rng);
  RunConfig c = default_run_config(Family::svm_rbf);
  c.model.svm_c = 10;
  const TrainedModel m = train_model(c, graphs, iota_list(0, 40), iota_list(40, 60), 0);
  CHECK(m.best_epoch == 1);
  CHECK(best_validation_loss(m) == mean_loss(m, graphs, iota_list(40, 60)));
  CHECK(compute_metrics(evaluate(m, graphs, iota_list(0, 40))).balanced_accuracy == 1.0);
}

TEST_CASE("grid search selection") {
  const SyntheticData data = small_synthetic(5);
  GraphCache cache(data.dataset);
  const IndexList train = iota_list(0, 60), val = iota_list(60, 80);
  const RunConfig base = quick(Family::gcn);

  HyperGrid single;
  single.set_axis("hidden_dim", {"6"});
  const SearchResult one = grid_search(base, single, cache, train, val, 1);
  CHECK(one.best == 0);
  CHECK(one.config.model.hidden_dim == 6);

  HyperGrid lrs({{"lr", {"1000", "0.01"}}});
  RunConfig long_run = base;
  long_run.train.max_epochs = 20;
  const SearchResult s = grid_search(long_run, lrs, cache, train, val, 1);
  CHECK(s.points.size() == 2);
  CHECK(s.config.train.learning_rate == 0.01);
  const SearchResult again = grid_search(long_run, lrs, cache, train, val, 1, 2);
  CHECK(again.best == s.best);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(again.points[i].error == s.points[i].error);
    if (!s.points[i].aborted()) CHECK(again.points[i].val_loss == s.points[i].val_loss);
  }

  HyperGrid doomed;
  doomed.set_axis("lr", {"1e300"});
  CHECK_THROWS_AS(grid_search(base, doomed, cache, train, val, 1), SearchError);
}

TEST_CASE("cross-validation") {
  const SyntheticData data = small_synthetic(6, 100);
  GraphCache cache(data.dataset);
  CvOptions opt;
  opt.seed = 3;
  const ExperimentReport r = cross_validate(quick(Family::gcn), cache, opt);
  REQUIRE(r.folds.size() == 5);
  std::set<std::size_t> tested;
  for (const auto& f : r.folds) {
    CHECK(f.counts.total() == f.test.size());
    CHECK(f.test.size() == 20);
    for (std::size_t i : f.test) tested.insert(i);
    CHECK(f.metrics.balanced_accuracy >= 0.0);
    CHECK(f.metrics.balanced_accuracy <= 1.0);
  }
  CHECK(tested.size() == 100);

  std::vector<double> bal;
  for (const auto& f : r.folds) bal.push_back(f.metrics.balanced_accuracy);
  const Aggregate agg = r.summary();
  CHECK(agg.balanced_accuracy.mean == mean_std(bal).mean);
  CHECK(agg.balanced_accuracy.std == mean_std(bal).std);
  CHECK(agg.completed == 5);

  opt.jobs = 3;
  const ExperimentReport threaded = cross_validate(quick(Family::gcn), cache, opt);
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(threaded.folds[f].counts == r.folds[f].counts);
    CHECK(threaded.folds[f].best_epoch == r.folds[f].best_epoch);
  }

  Rng rng(7);
  const TimeSeriesDataset same = identical_subjects(50, 6, 40, rng);
  GraphCache same_cache(same);
  const Aggregate flat = cross_validate(quick(Family::gcn), same_cache, {}).summary();
  CHECK(flat.balanced_accuracy.mean == 0.5);
  CHECK(flat.balanced_accuracy.std == 0.0);

  RunConfig diverge = quick(Family::gcn);
  diverge.train.learning_rate = 1e300;
  const ExperimentReport failed = cross_validate(diverge, cache, {});
  CHECK(failed.summary().aborted == 5);
  for (const auto& row : fold_rows(failed)) {
    CHECK(row.aborted);
    CHECK(row.chosen_hparams.rfind("aborted: ", 0) == 0);
  }
}

TEST_CASE("every family runs through cross-validation") {
  const SyntheticData data = small_synthetic(8, 50);
  GraphCache cache(data.dataset);
  for (Family f : all_families()) {
    RunConfig c = quick(f);
    c.train.max_epochs = 2;
    const ExperimentReport r = cross_validate(c, cache, {});
    CHECK_MESSAGE(r.summary().completed == 5, to_string(f));
  }
}

TEST_CASE("protocol keeps test folds out of selection") {
  const SyntheticData data = small_synthetic(9, 120);
  GraphCache cache(data.dataset);
  ProtocolOptions opt;
  opt.cv.seed = 4;
  HyperGrid grid({{"lr", {"0.01", "0.001"}}});
  const ProtocolResult res = run_protocol(quick(Family::gcn), grid, cache, opt);
  CHECK(res.selection.size() == 18);
  const ProtocolAudit audit = audit_protocol(res);
  CHECK(audit.clean());
  CHECK(audit.sets_checked == 20);
  std::size_t tested = 0;
  for (const auto& f : res.report.folds) tested += f.test.size();
  CHECK(tested == 120 - 18);
  for (const auto& f : res.report.folds) CHECK(f.chosen_hparams == format_assignment(res.search.points[res.search.best].assignment));

  opt.reuse_selection_in_cv = true;
  const ProtocolAudit leaky = audit_protocol(run_protocol(quick(Family::gcn), grid, cache, opt));
  CHECK_FALSE(leaky.clean());
  CHECK(leaky.overlaps > 0);
}

TEST_CASE("reports round-trip") {
  const SyntheticData data = small_synthetic(10, 60);
  GraphCache cache(data.dataset);
  std::vector<FoldRow> rows;
  for (Family f : {Family::gcn, Family::mlp}) {
    CvOptions opt;
    opt.experiment = "demo";
    const auto fr = fold_rows(cross_validate(quick(f), cache, opt));
    rows.insert(rows.end(), fr.begin(), fr.end());
  }
  TempDir dir;
  write_fold_report(dir / "report_folds.csv", rows);
  write_summary(dir / "report_summary.csv", summarize(rows));
  CHECK(slurp(dir / "report_folds.csv").rfind("experiment,family,fold,tp,fp,tn,fn,bal_acc,sens,spec,chosen_hparams\n", 0) == 0);
  CHECK(slurp(dir / "report_summary.csv").rfind("family,metric,mean,std\n", 0) == 0);

  const auto parsed = read_fold_report(dir / "report_folds.csv");
  REQUIRE(parsed.size() == 10);
  const auto recomputed = summarize(parsed);
  const auto stored = read_summary(dir / "report_summary.csv");
  REQUIRE(recomputed.size() == stored.size());
  CHECK(stored.size() == 6);
  for (std::size_t i = 0; i < stored.size(); ++i) {
    CHECK(recomputed[i].family == stored[i].family);
    CHECK(recomputed[i].metric == stored[i].metric);
    CHECK(recomputed[i].mean == stored[i].mean);
    CHECK(recomputed[i].std == stored[i].std);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parsed[i].counts == rows[i].counts);
    CHECK(parsed[i].metrics.balanced_accuracy == rows[i].metrics.balanced_accuracy);
  }
}

TEST_CASE("scaling study") {
  const SyntheticData data = small_synthetic(11, 160);
  GraphCache cache(data.dataset);
  ScalingOptions opt;
  opt.sizes = {40, 80, 120};
  opt.test_size = 40;
  const std::vector<RunConfig> configs = {quick(Family::gcn), quick(Family::svm_rbf)};
  const auto points = scaling_study(configs, cache, opt);
  REQUIRE(points.size() == 6);
  for (const auto& p : points) {
    CHECK(p.test_hash == points[0].test_hash);
    CHECK(p.train.size() == p.train_size);
    CHECK(p.counts.total() == 40);
    const std::set<std::size_t> test(p.test.begin(), p.test.end());
    for (std::size_t i : p.train) CHECK_FALSE(test.contains(i));
  }
  for (std::size_t s = 0; s + 1 < 3; ++s) {
    const std::set<std::size_t> larger(points[s + 1].train.begin(), points[s + 1].train.end());
    for (std::size_t i : points[s].train) CHECK(larger.contains(i));
  }
  opt.sizes = {100};
  CHECK(scaling_study({quick(Family::gcn)}, cache, opt).size() == 1);
  opt.sizes = {150};
  CHECK_THROWS_AS(scaling_study({quick(Family::gcn)}, cache, opt), ConfigurationError);
}

TEST_CASE("threshold sweep") {
  const SyntheticData data = small_synthetic(12, 60);
  GraphCache cache(data.dataset);
  SweepOptions opt;
  opt.keep_fractions = {0.3};
  opt.cv.seed = 2;
  const RunConfig base = quick(Family::gcn);
  const auto cells = threshold_sweep(base, cache, opt);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].arm == "none");
  CHECK(cells[1].arm == "heat");

  RunConfig plain = base;
  plain.graph.keep_fraction = 0.3;
  const ExperimentReport direct = cross_validate(plain, cache, opt.cv);
  for (std::size_t f = 0; f < 5; ++f) CHECK(direct.folds[f].counts == cells[0].report.folds[f].counts);
  CHECK(direct.summary().balanced_accuracy.mean == cells[0].summary.balanced_accuracy.mean);

  TempDir dir;
  write_sweep_table(dir / "sweep.csv", cells);
  const std::string text = slurp(dir / "sweep.csv");
  CHECK(text.rfind("arm,keep_fraction,removed_fraction,mean_bal_acc,std_bal_acc,completed_folds,aborted_folds\n", 0) == 0);
  CHECK(text.find("none,0.3,0.7,") != std::string::npos);
}

TEST_CASE("svg plots") {
  const PlotSeries one{"gcn", {1, 2}, {0.5, 0.7}, {}};
  const std::string svg = render_plot({one}, {"title", "x", "y"});
  CHECK(occurrences(svg, "<polyline") == 1);
  CHECK(svg == render_plot({one}, {"title", "x", "y"}));

  std::vector<PlotSeries> arms;
  for (const char* name : {"none", "heat"}) {
    PlotSeries s{name, {}, {}, {}};
    for (int i = 1; i <= 10; ++i) {
      s.x.push_back(0.05 * i);
      s.y.push_back(0.6 + 0.01 * i);
      s.err.push_back(0.02);
    }
    arms.push_back(s);
  }
  const std::string two = render_plot(arms, {"sweep", "keep", "bal_acc"});
  CHECK(occurrences(two, "<polyline") == 2);
  const auto first = two.find("points=\"");
  const auto close = two.find('"', first + 8);
  CHECK(occurrences(two.substr(first, close - first), ",") == 10);

  TempDir dir;
  emit_plot(dir / "a.svg", arms, {"sweep", "keep", "bal_acc"});
  emit_plot(dir / "b.svg", arms, {"sweep", "keep", "bal_acc"});
  CHECK(slurp(dir / "a.svg") == slurp(dir / "b.svg"));

  CHECK_THROWS_AS(render_plot({}, {}), ConfigurationError);
  CHECK_THROWS_AS(render_plot({PlotSeries{"e", {}, {}, {}}}, {}), ConfigurationError);
  CHECK_THROWS_AS(render_plot({PlotSeries{"r", {1, 2}, {1}, {}}}, {}), ConfigurationError);
}
