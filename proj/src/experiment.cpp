#include "ssgnn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace ssgnn {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

namespace {

std::vector<double> as_double_list(const json& j) {
  if (j.is_number()) return {j.get<double>()};
  return j.get<std::vector<double>>();
}

SbmParams sbm_from_json(const json& j) {
  SbmParams p;
  p.block_sizes = j.at("blocks").get<std::vector<int>>();
  p.p_in = j.value("p_in", p.p_in);
  p.p_out = j.value("p_out", p.p_out);
  p.feature_dim = j.value("feature_dim", p.feature_dim);
  p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
  p.train_per_class = j.value("train_per_class", p.train_per_class);
  p.val_per_class = j.value("val_per_class", p.val_per_class);
  p.seed = j.value("seed", p.seed);
  return p;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  ExperimentSpec spec;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    if (d.is_string()) {
      spec.dataset_path = d.get<std::string>();
      spec.dataset_name = fs::path(spec.dataset_path).stem().string();
    } else if (d.is_object() && d.contains("sbm")) {
      spec.synthetic = sbm_from_json(d.at("sbm"));
      spec.dataset_name = "sbm";
    } else {
      throw std::invalid_argument("spec: 'dataset' must be a path or {\"sbm\": {...}}");
    }
  } else {
    throw std::invalid_argument("spec: missing 'dataset'");
  }
  if (j.contains("name")) spec.dataset_name = j.at("name").get<std::string>();
  spec.task = j.value("task", spec.task);
  spec.strategy = j.value("strategy", spec.strategy);
  spec.labeler = j.value("labeler", spec.labeler);
  if (j.contains("lambda")) spec.lambda_grid = as_double_list(j.at("lambda"));
  if (j.contains("alpha")) spec.alpha_grid = as_double_list(j.at("alpha"));
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.is_number()) {
      spec.seeds.clear();
      for (std::uint64_t i = 0; i < s.get<std::uint64_t>(); ++i) spec.seeds.push_back(i);
    } else {
      spec.seeds = s.get<std::vector<std::uint64_t>>();
    }
  }
  if (j.contains("few_label_n")) spec.few_label_n = j.at("few_label_n").get<int>();
  spec.output_dir = j.value("output_dir", spec.output_dir);
  spec.workers = j.value("workers", spec.workers);
  if (j.contains("partition_file")) {
    spec.partition_file = j.at("partition_file").get<std::string>();
  }
  spec.dump_targets = j.value("dump_targets", false);
  spec.dump_weak_labels = j.value("dump_weak_labels", false);

  TrainConfig& b = spec.base;
  b.epochs = j.value("epochs", b.epochs);
  b.lr = j.value("lr", b.lr);
  b.weight_decay = j.value("weight_decay", b.weight_decay);
  b.hidden = j.value("hidden", b.hidden);
  b.dropout = j.value("dropout", b.dropout);
  b.arch_preset = j.value("arch", b.arch_preset);
  b.pretrain_arch_preset = j.value("pretrain_arch", b.pretrain_arch_preset);
  b.pretrain_epochs = j.value("pretrain_epochs", b.pretrain_epochs);
  b.context_hops = j.value("context_hops", b.context_hops);
  b.ica_rounds = j.value("ica_rounds", b.ica_rounds);
  b.correct_rounds = j.value("correct_rounds", b.correct_rounds);
  b.correct_m = j.value("correct_m", b.correct_m);
  b.correct_p = j.value("correct_p", b.correct_p);
  b.patience = j.value("patience", b.patience);
  b.confidence_k = j.value("confidence_k", -1);
  if (j.contains("pretext")) {
    const auto& p = j.at("pretext");
    b.pretext.m_e = p.value("m_e", 0);
    b.pretext.m_a = p.value("m_a", 0);
    b.pretext.d_pca = p.value("d_pca", b.pretext.d_pca);
    b.pretext.k_clusters = p.value("k_clusters", b.pretext.k_clusters);
    b.pretext.pair_sample = p.value("pair_sample", b.pretext.pair_sample);
    b.pretext.k_pairs = p.value("k_pairs", b.pretext.k_pairs);
    spec.m_e_fraction = p.value("m_e_fraction", spec.m_e_fraction);
    spec.m_a_fraction = p.value("m_a_fraction", spec.m_a_fraction);
  }
  return spec;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid JSON in spec '" + path + "': " + e.what());
  }
  return from_json(j);
}

std::pair<Graph, SplitMasks> load_spec_dataset(const ExperimentSpec& spec) {
  if (spec.synthetic) return generate_sbm(*spec.synthetic);
  if (spec.dataset_path.empty()) throw std::invalid_argument("spec: no dataset given");
  return load_dataset(spec.dataset_path);
}

namespace {

// m_e/m_a defaults and fractions (of |V|) resolved against the graph.
void resolve_pretext_counts(TrainConfig& cfg, const ExperimentSpec& spec, const Graph& g) {
  auto resolve = [&](int count, double fraction, int cap) {
    if (count > 0) return std::min(count, cap);
    const double f = fraction >= 0.0 ? fraction : 0.10;
    return std::min(static_cast<int>(std::lround(f * g.num_nodes)), cap);
  };
  cfg.pretext.m_e = resolve(cfg.pretext.m_e, spec.m_e_fraction, g.num_edges());
  cfg.pretext.m_a = resolve(cfg.pretext.m_a, spec.m_a_fraction, g.num_nodes);
}

TwoStageStrategy strategy_from_name(const std::string& s) {
  if (s == "joint") return TwoStageStrategy::None;
  if (s == "two-stage:fix") return TwoStageStrategy::Fix;
  if (s == "two-stage:tune_all") return TwoStageStrategy::TuneAll;
  throw std::invalid_argument("unknown strategy '" + s +
                              "' (valid: joint, two-stage:fix, two-stage:tune_all)");
}

std::string model_label(const ExperimentSpec& spec, TaskId task) {
  std::string label = task_name(task);
  if (task == TaskId::ContextLabel || task == TaskId::CorrectedLabel) {
    label += "-" + spec.labeler;
  }
  if (spec.strategy != "joint") label += "+" + spec.strategy;
  return label;
}

std::string run_id_of(const std::string& model, double lambda, double alpha,
                      std::uint64_t seed) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s_lam%g_a%g_seed%llu", model.c_str(), lambda, alpha,
                static_cast<unsigned long long>(seed));
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  const TaskId task = task_from_name(spec.task);
  const TwoStageStrategy strategy = strategy_from_name(spec.strategy);
  auto [graph, base_masks] = load_spec_dataset(spec);

  TrainConfig base = spec.base;
  base.task = task;
  base.two_stage = strategy;
  base.labeler = spec.labeler == "ica" ? Labeler::ICA : Labeler::LP;
  resolve_pretext_counts(base, spec, graph);
  if (spec.partition_file) {
    std::ifstream in(*spec.partition_file);
    if (!in) throw std::runtime_error("cannot open partition file '" + *spec.partition_file + "'");
    json j;
    in >> j;
    base.pretext.external_partition =
        j.is_array() ? j.get<std::vector<int>>() : j.at("cluster_of").get<std::vector<int>>();
  }

  std::vector<double> lambdas = spec.lambda_grid;
  if (is_baseline(task)) lambdas = {0.0};
  std::vector<double> alphas =
      (task == TaskId::CorrectedLabel && !spec.alpha_grid.empty()) ? spec.alpha_grid
                                                                   : std::vector<double>{base.alpha};

  struct Item {
    double lambda, alpha;
    std::uint64_t seed;
  };
  std::vector<Item> items;
  for (double lam : lambdas) {
    for (double al : alphas) {
      for (std::uint64_t s : spec.seeds) items.push_back({lam, al, s});
    }
  }

  const std::string model = model_label(spec, task);
  std::vector<RunResult> results(items.size());
  std::vector<std::string> failures(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      const Item& item = items[i];
      try {
        TrainConfig cfg = base;
        cfg.lambda = item.lambda;
        cfg.alpha = item.alpha;
        cfg.seed = item.seed;
        SplitMasks masks = spec.few_label_n
                               ? few_label_split(graph, *spec.few_label_n, item.seed)
                               : base_masks;
        results[i] = run_training(graph, masks, cfg);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  {
    const int nw = std::max(1, spec.workers);
    std::vector<std::thread> pool;
    for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!failures[i].empty()) {
      throw std::runtime_error("run " +
                               run_id_of(model, items[i].lambda, items[i].alpha, items[i].seed) +
                               " failed: " + failures[i]);
    }
  }

  fs::create_directories(spec.output_dir);
  fs::create_directories(fs::path(spec.output_dir) / "runs");

  ExperimentReport report;
  for (std::size_t i = 0; i < items.size(); ++i) {
    RunRecord rec;
    rec.lambda = items[i].lambda;
    rec.alpha = items[i].alpha;
    rec.seed = items[i].seed;
    rec.val_acc = results[i].best_val_acc;
    rec.test_acc = results[i].test_acc;
    rec.run_id = run_id_of(model, rec.lambda, rec.alpha, rec.seed);
    report.runs.push_back(rec);
  }
  std::sort(report.runs.begin(), report.runs.end(), [](const RunRecord& a, const RunRecord& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    if (a.alpha != b.alpha) return a.alpha < b.alpha;
    return a.seed < b.seed;
  });

  // Per-run JSON artifacts (join on run_id).
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string id = run_id_of(model, items[i].lambda, items[i].alpha, items[i].seed);
    std::ofstream out(fs::path(spec.output_dir) / "runs" / (id + ".json"));
    json j = results[i].to_json();
    j["run_id"] = id;
    j["dataset"] = spec.dataset_name;
    j["model"] = model;
    out << j.dump(2) << '\n';
  }

  // runs.csv: one row per run.
  {
    std::ofstream out(fs::path(spec.output_dir) / "runs.csv");
    out << "dataset,model,lambda,alpha,seed,val_acc,test_acc,run_id\n";
    for (const auto& r : report.runs) {
      out << spec.dataset_name << ',' << model << ',' << format_double(r.lambda) << ','
          << format_double(r.alpha) << ',' << r.seed << ',' << format_double(r.val_acc) << ','
          << format_double(r.test_acc) << ',' << r.run_id << '\n';
    }
  }

  // Grid aggregation; best point by mean validation accuracy.
  struct GridStat {
    double lambda, alpha;
    std::vector<double> vals, tests;
  };
  std::vector<GridStat> grid;
  for (double lam : lambdas) {
    for (double al : alphas) {
      GridStat gstat{lam, al, {}, {}};
      for (const auto& r : report.runs) {
        if (r.lambda == lam && r.alpha == al) {
          gstat.vals.push_back(r.val_acc);
          gstat.tests.push_back(r.test_acc);
        }
      }
      grid.push_back(std::move(gstat));
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (mean_of(grid[i].vals) > mean_of(grid[best].vals)) best = i;
  }
  report.best_lambda = grid[best].lambda;
  report.best_alpha = grid[best].alpha;
  report.best_mean_val = mean_of(grid[best].vals);
  report.best_mean_test = mean_of(grid[best].tests);
  report.best_std_test = sample_std(grid[best].tests);

  {
    std::ofstream out(fs::path(spec.output_dir) / "summary.csv");
    out << "dataset,model,lambda,alpha,mean_val,std_val,mean_test,std_test,selected\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << spec.dataset_name << ',' << model << ',' << format_double(grid[i].lambda) << ','
          << format_double(grid[i].alpha) << ',' << format_double(mean_of(grid[i].vals)) << ','
          << format_double(sample_std(grid[i].vals)) << ','
          << format_double(mean_of(grid[i].tests)) << ','
          << format_double(sample_std(grid[i].tests)) << ',' << (i == best ? 1 : 0) << '\n';
    }
  }

  // Plot data.
  if (lambdas.size() > 1) {
    std::ofstream out(fs::path(spec.output_dir) / "lambda_sensitivity.csv");
    out << "lambda,mean_test,std_test,mean_val\n";
    for (const auto& gstat : grid) {
      if (gstat.alpha != report.best_alpha) continue;
      out << format_double(gstat.lambda) << ',' << format_double(mean_of(gstat.tests)) << ','
          << format_double(sample_std(gstat.tests)) << ',' << format_double(mean_of(gstat.vals))
          << '\n';
    }
  }
  if (alphas.size() > 1) {
    std::ofstream out(fs::path(spec.output_dir) / "alpha_sensitivity.csv");
    out << "alpha,mean_test,std_test,mean_val\n";
    for (const auto& gstat : grid) {
      if (gstat.lambda != report.best_lambda) continue;
      out << format_double(gstat.alpha) << ',' << format_double(mean_of(gstat.tests)) << ','
          << format_double(sample_std(gstat.tests)) << ',' << format_double(mean_of(gstat.vals))
          << '\n';
    }
  }
  if (spec.few_label_n) {
    std::ofstream out(fs::path(spec.output_dir) / "few_label.csv");
    out << "dataset,model,n_per_class,seed,test_acc\n";
    for (const auto& r : report.runs) {
      if (r.lambda != report.best_lambda || r.alpha != report.best_alpha) continue;
      out << spec.dataset_name << ',' << model << ',' << *spec.few_label_n << ',' << r.seed
          << ',' << format_double(r.test_acc) << '\n';
    }
  }

  if (spec.dump_targets && !is_baseline(task) && task != TaskId::Distance2Labeled &&
      task != TaskId::ContextLabel && task != TaskId::EnsembleLabel &&
      task != TaskId::CorrectedLabel) {
    PretextKind kind;
    switch (task) {
      case TaskId::NodeProperty: kind = PretextKind::NodeProperty; break;
      case TaskId::EdgeMask: kind = PretextKind::EdgeMask; break;
      case TaskId::PairwiseDistance: kind = PretextKind::PairwiseDistance; break;
      case TaskId::Distance2Clusters: kind = PretextKind::Distance2Clusters; break;
      case TaskId::AttributeMask: kind = PretextKind::AttributeMask; break;
      default: kind = PretextKind::PairwiseAttrSim; break;
    }
    PretextTarget target =
        build_pretext_target(kind, graph, base_masks, base.pretext, spec.seeds.front());
    std::ofstream out(fs::path(spec.output_dir) / "targets.json");
    out << pretext_target_to_json(target).dump(2) << '\n';
  }
  if (spec.dump_weak_labels && !spec.few_label_n &&
      (task == TaskId::ContextLabel || task == TaskId::CorrectedLabel ||
       task == TaskId::EnsembleLabel)) {
    json j;
    if (spec.labeler == "lp" || task == TaskId::EnsembleLabel) {
      j["lp"] = weak_labels_to_json(label_propagation(graph, base_masks));
    }
    if (spec.labeler == "ica" || task == TaskId::EnsembleLabel) {
      j["ica"] = weak_labels_to_json(ica(graph, base_masks, base.ica_rounds, spec.seeds.front()));
    }
    std::ofstream out(fs::path(spec.output_dir) / "weak_labels.json");
    out << j.dump() << '\n';
  }

  return report;
}

ProbeReport run_probe(const ExperimentSpec& spec) {
  const TaskId task = task_from_name(spec.task);
  PretextKind kind;
  switch (task) {
    case TaskId::NodeProperty: kind = PretextKind::NodeProperty; break;
    case TaskId::EdgeMask: kind = PretextKind::EdgeMask; break;
    case TaskId::PairwiseDistance: kind = PretextKind::PairwiseDistance; break;
    default:
      throw std::invalid_argument("probe: task '" + spec.task +
                                  "' has no classification form (supported: node-property, "
                                  "edge-mask, pairwise-distance)");
  }
  auto [graph, masks] = load_spec_dataset(spec);
  TrainConfig base = spec.base;
  resolve_pretext_counts(base, spec, graph);

  std::vector<double> raw_accs, gcn_accs;
  for (std::uint64_t seed : spec.seeds) {
    raw_accs.push_back(probe_pretext(graph, masks, kind, graph.features, base.pretext, seed));
    TrainConfig cfg = base;
    cfg.task = TaskId::Gcn;
    cfg.lambda = 0.0;
    cfg.seed = seed;
    ModelParams best;
    train_joint_capture(graph, masks, cfg, &best);
    EvalOutput eval = evaluate_model(normalize_adjacency(graph), graph.features, best, cfg.arch());
    gcn_accs.push_back(probe_pretext(graph, masks, kind, eval.z, base.pretext, seed));
  }

  fs::create_directories(spec.output_dir);
  std::ofstream out(fs::path(spec.output_dir) / "probe.csv");
  out << "dataset,task,representation,seed,accuracy\n";
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
    out << spec.dataset_name << ',' << spec.task << ",raw_features," << spec.seeds[i] << ','
        << format_double(raw_accs[i]) << '\n';
  }
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
    out << spec.dataset_name << ',' << spec.task << ",gcn_embeddings," << spec.seeds[i] << ','
        << format_double(gcn_accs[i]) << '\n';
  }
  ProbeReport report;
  report.raw_acc = mean_of(raw_accs);
  report.gcn_acc = mean_of(gcn_accs);
  out << spec.dataset_name << ',' << spec.task << ",gap_mean,-,"
      << format_double(report.gcn_acc - report.raw_acc) << '\n';
  return report;
}

}  // namespace ssgnn
