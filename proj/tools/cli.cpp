#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "adacon/config.hpp"
#include "adacon/data.hpp"
#include "adacon/diagnostics.hpp"
#include "adacon/ecdf.hpp"
#include "adacon/error.hpp"
#include "adacon/gradcheck.hpp"
#include "adacon/model.hpp"
#include "adacon/trainer.hpp"

namespace adacon::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "undefined"; }

/// Flags shared by `train` and `compare` that override config-file keys.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flag_values;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "key=value run configuration file");
    cmd.add_option("--set", sets, "override one key (key=value); repeatable");
    for (const char* key : {"dataset", "data", "n", "dim", "noise", "seed", "iterations", "con", "reg", "gamma_con",
                            "out", "run_id", "mode", "temperature", "sigma_aug", "lr"}) {
      const std::string name = std::string("--") + key;
      cmd.add_option_function<std::string>(
          name, [this, k = std::string(key)](const std::string& v) { flag_values[k] = v; }, "config key " + std::string(key));
    }
  }

  RunConfig resolve() const {
    RunConfig config;
    if (const char* env = std::getenv("ADACON_OUT"); env != nullptr && *env != '\0') config.out_root = env;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw Error("config file not found: " + config_path);
      apply_key_values(config, load_key_values(config_path));
    }
    KeyValues overrides;
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + s + "'");
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& [k, v] : flag_values) overrides[k] = v;
    try {
      apply_key_values(config, overrides);
    } catch (const Error& e) {
      throw CLI::ValidationError("--set", e.what());
    }
    return config;
  }
};

struct RunOutcome {
  TrainResult result;
  std::optional<double> spearman_rho;
  fs::path dir;
};

/// Trains one configuration and writes its outputs under <out>/<run_id>/.
RunOutcome execute_run(const RunConfig& config, std::ostream& log) {
  const fs::path dir = config.out_root / config.run_id;
  fs::create_directories(dir);
  // Echo before any work so an interrupted run still documents itself.
  write_key_values(dir / "config.cfg", to_key_values(config));

  const DatasetSplits splits = load_splits(config);
  if (!config.data_path) save_sidecar(dir / "data.meta", splits.train.metadata);
  save_csv(dir / "train.csv", splits.train);
  save_csv(dir / "val.csv", splits.val);
  save_csv(dir / "test.csv", splits.test);

  RunOutcome outcome;
  outcome.dir = dir;
  outcome.result = run_training(config.train, splits);
  const TrainRecord& rec = outcome.result.record;
  save_checkpoint(dir / "model.ckpt", outcome.result.params);
  write_record_csv(dir / "record.csv", rec);

  KeyValues summary = record_summary(rec);
  if (splits.test.size() >= 2) {
    const EcdfTable table = fit_ecdf(splits.train.labels);
    const EmbeddingBatch<double> emb = embed_dataset(outcome.result.params, splits.test);
    const ScatterDiagnostic scatter = pairwise_scatter(emb, table, 2000, config.train.seed);
    outcome.spearman_rho = scatter.spearman_rho;
    summary["spearman_rho"] = fmt_opt(scatter.spearman_rho);
    write_scatter_csv(dir / "scatter.csv", scatter);
    write_layout_csv(dir / "layout.csv", angular_layout(emb));
  }
  save_sidecar(dir / "summary.txt", summary);
  if (rec.aborted) log << "warning: run " << config.run_id << " aborted: " << rec.diagnostic << '\n';
  return outcome;
}

int cmd_train(const ConfigFlags& flags, std::ostream& out) {
  const RunConfig config = flags.resolve();
  const RunOutcome outcome = execute_run(config, out);
  const TrainRecord& rec = outcome.result.record;
  out << "run: " << outcome.dir.string() << '\n';
  if (rec.test) {
    out << "test_mae=" << fmt(rec.test->mae) << " test_rmse=" << fmt(rec.test->rmse)
        << " test_r2=" << fmt_opt(rec.test->r2) << '\n';
  }
  out << "gamma_con=" << fmt(rec.gamma_con) << " best_iteration=" << rec.best_iteration << '\n';
  return rec.aborted ? 2 : 0;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

/// Entry "adacon" or "adacon:two_stage".
std::pair<LossKind, TrainMode> parse_compare_entry(const std::string& entry) {
  const auto colon = entry.find(':');
  const LossKind kind = parse_loss_kind(entry.substr(0, colon));
  if (is_regression(kind)) throw Error("compare expects contrastive kinds or 'none', got " + entry);
  const TrainMode mode = colon == std::string::npos ? TrainMode::MultiTask : parse_train_mode(entry.substr(colon + 1));
  return {kind, mode};
}

int cmd_compare(const ConfigFlags& flags, const std::string& losses, int seeds, int jobs, std::ostream& out) {
  if (seeds < 1) throw CLI::ValidationError("--seeds", "must be >= 1");
  const RunConfig base = flags.resolve();
  std::vector<std::string> entries;
  {
    std::istringstream is(losses);
    std::string e;
    while (std::getline(is, e, ',')) {
      if (!e.empty()) entries.push_back(e);
    }
  }
  if (entries.empty()) throw CLI::ValidationError("--losses", "no losses given");

  struct Task {
    std::string entry;
    std::uint64_t seed;
    RunConfig config;
    std::optional<RunOutcome> outcome;
    std::string error;
  };
  std::vector<Task> tasks;
  const fs::path root = base.out_root / base.run_id;
  for (const std::string& e : entries) {
    const auto [kind, mode] = parse_compare_entry(e);
    for (int k = 0; k < seeds; ++k) {
      RunConfig c = base;
      const std::uint64_t s = base.train.seed + static_cast<std::uint64_t>(k);
      c.train.seed = s;
      c.generator.seed = s;
      c.split_seed = s;
      c.train.contrastive = kind;
      c.train.mode = mode;
      c.out_root = root;
      std::string id = e;
      std::replace(id.begin(), id.end(), ':', '_');
      c.run_id = id + "_seed" + std::to_string(s);
      tasks.push_back({e, s, std::move(c), std::nullopt, {}});
    }
  }

  fs::create_directories(root);
  write_key_values(root / "config.cfg", to_key_values(base));

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      std::ostringstream log;
      try {
        tasks[i].outcome = execute_run(tasks[i].config, log);
      } catch (const std::exception& ex) {
        tasks[i].error = ex.what();
      }
      std::lock_guard lock(log_mutex);
      out << log.str();
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }

  std::ofstream csv(root / "compare.csv");
  if (!csv) throw Error("cannot write file: " + (root / "compare.csv").string());
  csv.precision(17);
  csv << "loss,seed,test_mae,test_rmse,test_r2,best_val_mae,spearman_rho,gamma_con\n";
  bool failed = false;
  for (const std::string& e : entries) {
    std::vector<double> mae, rmse, r2, rho;
    for (const Task& t : tasks) {
      if (t.entry != e) continue;
      if (!t.outcome || !t.outcome->result.record.test) {
        failed = true;
        out << "error: " << e << " seed " << t.seed << ": " << (t.error.empty() ? "no test metrics" : t.error) << '\n';
        continue;
      }
      const TrainRecord& rec = t.outcome->result.record;
      csv << e << ',' << t.seed << ',' << rec.test->mae << ',' << rec.test->rmse << ',' << fmt_opt(rec.test->r2) << ','
          << (rec.best_val ? fmt(rec.best_val->mae) : "undefined") << ',' << fmt_opt(t.outcome->spearman_rho) << ','
          << rec.gamma_con << '\n';
      mae.push_back(rec.test->mae);
      rmse.push_back(rec.test->rmse);
      if (rec.test->r2) r2.push_back(*rec.test->r2);
      if (t.outcome->spearman_rho) rho.push_back(*t.outcome->spearman_rho);
    }
    csv << e << ",median," << median(mae) << ',' << median(rmse) << ',' << median(r2) << ",,"
        << median(rho) << ",\n";
    out << e << ": median test_mae=" << fmt(median(mae)) << " median spearman_rho=" << fmt(median(rho)) << '\n';
  }
  out << "summary: " << (root / "compare.csv").string() << '\n';
  return failed ? 2 : 0;
}

int cmd_gradcheck(const std::string& loss, int trials, std::uint64_t seed, double step, bool inactive,
                  std::ostream& out) {
  const LossKind kind = parse_loss_kind(loss);
  if (kind == LossKind::None) throw CLI::ValidationError("--loss", "'none' has no gradient");
  if (trials < 1) throw CLI::ValidationError("--trials", "must be >= 1");
  GradCheckInstanceOptions opt;
  opt.inactive_hinge = inactive;
  const GradCheckReport r = gradcheck_trials(kind, trials, seed, opt, step);
  const double tol = (kind == LossKind::Triplet && inactive) ? 1e-7 : 1e-5;
  out << "loss=" << loss << " trials=" << trials << " max_rel_error=" << fmt(r.max_rel_error)
      << " max_coordinate_rel_error=" << fmt(r.max_coordinate_rel_error)
      << " tolerance=" << fmt(tol) << '\n';
  const bool ok = r.max_rel_error < tol;
  out << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 2;
}

struct DiagnosticInputs {
  ModelParams params;
  Dataset data;
  EcdfTable table;
};

DiagnosticInputs load_diagnostic_inputs(const std::string& checkpoint, const std::string& data_path,
                                        const std::string& ecdf_path) {
  for (const std::string& p : {checkpoint, data_path}) {
    if (!fs::exists(p)) throw Error("file not found: " + p);
  }
  ModelParams params = load_checkpoint(checkpoint);
  Dataset data = load_csv(data_path);
  if (data.dim() != params.spec.input_dim) throw Error("dataset width does not match the checkpoint: " + data_path);
  const std::string source = ecdf_path.empty() ? data_path : ecdf_path;
  if (!fs::exists(source)) throw Error("file not found: " + source);
  EcdfTable table = fit_ecdf(load_csv(source).labels);
  return {std::move(params), std::move(data), std::move(table)};
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path, const std::string& ecdf_path,
             const std::string& out_dir, Eigen::Index pairs, std::uint64_t seed, std::ostream& out) {
  const DiagnosticInputs in = load_diagnostic_inputs(checkpoint, data_path, ecdf_path);
  const MetricsReport m = regression_metrics(predict(in.params, in.data.features), in.data.labels);
  KeyValues summary{{"mae", fmt(m.mae)}, {"rmse", fmt(m.rmse)}, {"r2", fmt_opt(m.r2)}, {"n", std::to_string(m.n)}};
  std::optional<ScatterDiagnostic> scatter;
  if (in.data.size() >= 2) {
    const EmbeddingBatch<double> emb = embed_dataset(in.params, in.data);
    scatter = pairwise_scatter(emb, in.table, pairs, seed);
    summary["spearman_rho"] = fmt_opt(scatter->spearman_rho);
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      write_scatter_csv(fs::path(out_dir) / "scatter.csv", *scatter);
      write_layout_csv(fs::path(out_dir) / "layout.csv", angular_layout(emb));
    }
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    save_sidecar(fs::path(out_dir) / "metrics.txt", summary);
  }
  for (const auto& [k, v] : summary) out << k << '=' << v << '\n';
  return 0;
}

int cmd_plotdata(const std::string& checkpoint, const std::string& data_path, const std::string& ecdf_path,
                 const std::string& out_dir, Eigen::Index pairs, std::uint64_t seed, std::ostream& out) {
  const DiagnosticInputs in = load_diagnostic_inputs(checkpoint, data_path, ecdf_path);
  const EmbeddingBatch<double> emb = embed_dataset(in.params, in.data);
  const ScatterDiagnostic scatter = pairwise_scatter(emb, in.table, pairs, seed);
  fs::create_directories(out_dir);
  write_scatter_csv(fs::path(out_dir) / "scatter.csv", scatter);
  write_layout_csv(fs::path(out_dir) / "layout.csv", angular_layout(emb));
  out << "spearman_rho=" << fmt_opt(scatter.spearman_rho) << '\n';
  out << "wrote " << (fs::path(out_dir) / "scatter.csv").string() << " and " << (fs::path(out_dir) / "layout.csv").string()
      << '\n';
  return 0;
}

int cmd_gen(const GeneratorSpec& spec, const std::string& path, std::ostream& out) {
  const Dataset data = generate_dataset(spec);
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  save_csv(p, data);
  fs::path meta = p;
  meta += ".meta";
  save_sidecar(meta, data.metadata);
  out << "wrote " << data.size() << " rows to " << p.string() << '\n';
  return 0;
}

int cmd_margins(const std::string& train_path, const std::string& labels, const std::string& out_path,
                std::ostream& out) {
  if (!fs::exists(train_path)) throw Error("file not found: " + train_path);
  const EcdfTable table = fit_ecdf(load_csv(train_path).labels);
  std::vector<double> ys;
  std::istringstream is(labels);
  std::string item;
  while (std::getline(is, item, ',')) ys.push_back(std::stod(item));
  const MarginMatrix mm = margin_matrix(table, Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())));

  std::ostringstream csv;
  csv.precision(17);
  for (Eigen::Index i = 0; i < mm.size(); ++i) {
    for (Eigen::Index j = 0; j < mm.size(); ++j) csv << (j ? "," : "") << mm.values(i, j);
    csv << '\n';
  }
  if (out_path.empty()) {
    out << csv.str();
  } else {
    std::ofstream os(out_path);
    if (!os) throw Error("cannot write file: " + out_path);
    os << csv.str();
  }
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive-margin contrastive regression toolkit"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "train one model and write its run directory");
  train_flags.attach(*train);

  ConfigFlags compare_flags;
  std::string losses = "adacon,supcon,none";
  int seeds = 5;
  int jobs = 1;
  CLI::App* compare = app.add_subcommand("compare", "multi-loss, multi-seed sweep with a median summary");
  compare_flags.attach(*compare);
  compare->add_option("--losses", losses, "comma list of adacon|supcon|npair|triplet|none, optional ':two_stage'");
  compare->add_option("--seeds", seeds, "number of seeds");
  compare->add_option("--jobs", jobs, "runs executed concurrently");

  std::string gc_loss = "adacon";
  int gc_trials = 100;
  std::uint64_t gc_seed = 0;
  double gc_step = 1e-6;
  bool gc_inactive = false;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of a loss gradient");
  gradcheck->add_option("--loss", gc_loss, "adacon|supcon|npair|triplet|l1|mse|huber");
  gradcheck->add_option("--trials", gc_trials, "random instances");
  gradcheck->add_option("--seed", gc_seed, "instance seed");
  gradcheck->add_option("--step", gc_step, "central-difference step");
  gradcheck->add_flag("--inactive-hinge", gc_inactive, "triplet only: draw inactive-hinge points");

  std::string checkpoint, data_path, ecdf_path, out_dir;
  Eigen::Index pairs = 2000;
  std::uint64_t diag_seed = 0;
  CLI::App* eval = app.add_subcommand("eval", "metrics and diagnostics of a checkpoint on a dataset");
  CLI::App* plotdata = app.add_subcommand("plotdata", "scatter and angular-layout CSVs for a checkpoint");
  for (CLI::App* c : {eval, plotdata}) {
    c->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    c->add_option("--data", data_path, "dataset CSV")->required();
    c->add_option("--ecdf-from", ecdf_path, "CSV whose labels define the ECDF (default: --data)");
    c->add_option("--pairs", pairs, "scatter pair count");
    c->add_option("--seed", diag_seed, "pair sampling seed");
  }
  eval->add_option("--out", out_dir, "directory for metrics.txt, scatter.csv, layout.csv");
  plotdata->add_option("--out", out_dir, "output directory")->required();

  GeneratorSpec gen_spec;
  std::string gen_kind = "ring", gen_map, gen_out;
  CLI::App* gen = app.add_subcommand("gen", "write a synthetic dataset to CSV");
  gen->add_option("--dataset", gen_kind, "ring|poly|skewed");
  gen->add_option("--n", gen_spec.n, "samples");
  gen->add_option("--dim", gen_spec.feature_dim, "feature dimension");
  gen->add_option("--noise", gen_spec.noise, "feature noise sigma");
  gen->add_option("--label-map", gen_map, "identity|cubic|skewed (default per dataset)");
  gen->add_option("--seed", gen_spec.seed, "generator seed");
  gen->add_option("--out", gen_out, "output CSV")->required();

  std::string mg_train, mg_labels, mg_out;
  CLI::App* margins = app.add_subcommand("margins", "dump the adaptive margin matrix for a label list as CSV");
  margins->add_option("--train", mg_train, "CSV whose labels define the ECDF")->required();
  margins->add_option("--labels", mg_labels, "comma-separated batch labels")->required();
  margins->add_option("--out", mg_out, "output CSV (default stdout)");

  std::vector<const char*> argv{"adacon_cli"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(train_flags, out);
    if (*compare) return cmd_compare(compare_flags, losses, seeds, jobs, out);
    if (*gradcheck) return cmd_gradcheck(gc_loss, gc_trials, gc_seed, gc_step, gc_inactive, out);
    if (*eval) return cmd_eval(checkpoint, data_path, ecdf_path, out_dir, pairs, diag_seed, out);
    if (*plotdata) return cmd_plotdata(checkpoint, data_path, ecdf_path, out_dir, pairs, diag_seed, out);
    if (*gen) {
      gen_spec.kind = parse_dataset_kind(gen_kind);
      if (!gen_map.empty()) gen_spec.label_map = parse_label_map(gen_map);
      return cmd_gen(gen_spec, gen_out, out);
    }
    if (*margins) return cmd_margins(mg_train, mg_labels, mg_out, out);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace adacon::cli
