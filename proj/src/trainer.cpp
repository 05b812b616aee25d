#include "ssgnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <stdexcept>

namespace ssgnn {

std::string task_name(TaskId task) {
  switch (task) {
    case TaskId::Gcn: return "gcn";
    case TaskId::GcnDropped: return "gcn-dropped";
    case TaskId::GcnPca: return "gcn-pca";
    case TaskId::SelfTraining: return "self-training";
    case TaskId::NodeProperty: return "node-property";
    case TaskId::EdgeMask: return "edge-mask";
    case TaskId::PairwiseDistance: return "pairwise-distance";
    case TaskId::Distance2Clusters: return "distance2clusters";
    case TaskId::AttributeMask: return "attribute-mask";
    case TaskId::PairwiseAttrSim: return "pairwise-attrsim";
    case TaskId::Distance2Labeled: return "distance2labeled";
    case TaskId::ContextLabel: return "context-label";
    case TaskId::EnsembleLabel: return "ensemble-label";
    case TaskId::CorrectedLabel: return "corrected-label";
  }
  throw std::logic_error("task_name: unhandled task");
}

TaskId task_from_name(const std::string& name) {
  static const std::vector<TaskId> all = {
      TaskId::Gcn,          TaskId::GcnDropped,      TaskId::GcnPca,
      TaskId::SelfTraining, TaskId::NodeProperty,    TaskId::EdgeMask,
      TaskId::PairwiseDistance, TaskId::Distance2Clusters, TaskId::AttributeMask,
      TaskId::PairwiseAttrSim,  TaskId::Distance2Labeled,  TaskId::ContextLabel,
      TaskId::EnsembleLabel,    TaskId::CorrectedLabel};
  for (TaskId t : all) {
    if (task_name(t) == name) return t;
  }
  std::string valid;
  for (TaskId t : all) valid += (valid.empty() ? "" : ", ") + task_name(t);
  throw std::invalid_argument("unknown task id '" + name + "' (valid: " + valid + ")");
}

bool is_baseline(TaskId task) {
  return task == TaskId::Gcn || task == TaskId::GcnDropped || task == TaskId::GcnPca ||
         task == TaskId::SelfTraining;
}

ArchConfig TrainConfig::arch() const {
  ArchConfig a = ArchConfig::preset(arch_preset);
  a.hidden_dim = hidden;
  a.dropout = dropout;
  return a;
}

ArchConfig TrainConfig::pretrain_arch() const {
  ArchConfig a = ArchConfig::preset(pretrain_arch_preset.empty() ? arch_preset
                                                                 : pretrain_arch_preset);
  a.hidden_dim = hidden;
  a.dropout = dropout;
  return a;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["hidden"] = hidden;
  j["dropout"] = dropout;
  j["lambda"] = lambda;
  j["alpha"] = alpha;
  j["task"] = task_name(task);
  j["labeler"] = labeler == Labeler::LP ? "lp" : "ica";
  j["context_hops"] = context_hops;
  j["ica_rounds"] = ica_rounds;
  j["correct_rounds"] = correct_rounds;
  j["correct_m"] = correct_m;
  j["correct_p"] = correct_p;
  j["arch"] = arch_preset;
  if (!pretrain_arch_preset.empty()) j["pretrain_arch"] = pretrain_arch_preset;
  if (pretrain_epochs >= 0) j["pretrain_epochs"] = pretrain_epochs;
  j["strategy"] = two_stage == TwoStageStrategy::None
                      ? "joint"
                      : (two_stage == TwoStageStrategy::Fix ? "two-stage:fix"
                                                            : "two-stage:tune_all");
  j["seed"] = seed;
  if (patience > 0) j["patience"] = patience;
  if (confidence_k >= 0) j["confidence_k"] = confidence_k;
  j["pretext"] = {{"m_e", pretext.m_e},
                  {"m_a", pretext.m_a},
                  {"d_pca", pretext.d_pca},
                  {"k_clusters", pretext.k_clusters},
                  {"pair_sample", pretext.pair_sample},
                  {"k_pairs", pretext.k_pairs}};
  return j;
}

nlohmann::json RunResult::to_json() const {
  nlohmann::json j;
  j["train_loss"] = train_loss;
  j["val_loss"] = val_loss;
  j["train_acc"] = train_acc;
  j["val_acc"] = val_acc;
  j["joint_loss"] = joint_loss;
  j["test_acc"] = test_acc;
  j["best_epoch"] = best_epoch;
  j["best_val_acc"] = best_val_acc;
  j["seed"] = seed;
  j["config"] = config;
  return j;
}

double accuracy(const Matrix& logits, const std::vector<int>& labels,
                const std::vector<int>& mask) {
  if (mask.empty()) return 0.0;
  int correct = 0;
  for (int v : mask) {
    if (argmax_row(logits, v) == labels[static_cast<std::size_t>(v)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

namespace {

double ce_loss_eval(const Matrix& logits, const std::vector<int>& labels,
                    const std::vector<int>& mask) {
  if (mask.empty()) return 0.0;
  double loss = 0.0;
  for (int i : mask) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd shifted = logits.row(i).array() - mx;
    const double lse = std::log(shifted.array().exp().sum());
    loss += lse - shifted(labels[static_cast<std::size_t>(i)]);
  }
  return loss / static_cast<double>(mask.size());
}

PretextKind basic_kind(TaskId task) {
  switch (task) {
    case TaskId::NodeProperty: return PretextKind::NodeProperty;
    case TaskId::EdgeMask: return PretextKind::EdgeMask;
    case TaskId::PairwiseDistance: return PretextKind::PairwiseDistance;
    case TaskId::Distance2Clusters: return PretextKind::Distance2Clusters;
    case TaskId::AttributeMask: return PretextKind::AttributeMask;
    case TaskId::PairwiseAttrSim: return PretextKind::PairwiseAttrSim;
    default: throw std::logic_error("basic_kind: not a basic pretext task");
  }
}

bool is_basic_pretext(TaskId task) {
  switch (task) {
    case TaskId::NodeProperty:
    case TaskId::EdgeMask:
    case TaskId::PairwiseDistance:
    case TaskId::Distance2Clusters:
    case TaskId::AttributeMask:
    case TaskId::PairwiseAttrSim:
      return true;
    default:
      return false;
  }
}

bool is_label_task(TaskId task) {
  switch (task) {
    case TaskId::Distance2Labeled:
    case TaskId::ContextLabel:
    case TaskId::EnsembleLabel:
    case TaskId::CorrectedLabel:
      return true;
    default:
      return false;
  }
}

Matrix task_pca_features(const Graph& g, const PretextConfig& cfg) {
  const Eigen::Index d =
      std::min<Eigen::Index>(cfg.d_pca, std::min(g.features.rows(), g.features.cols()));
  return pca_reduce(g.features, d);
}

// Everything a joint run needs, resolved before the first epoch.
struct RunMaterials {
  SpMatrix a_task;
  Matrix x_task;
  SpMatrix a_ssl;   // ssl-branch propagation (EdgeMask trains on the masked graph)
  Matrix x_ssl;
  bool separate_ssl_forward = false;
  bool use_ssl = false;
  int ssl_dim = 0;
  std::optional<PretextTarget> pretext;
  // Label tasks:
  Matrix ssl_targets;          // ybar (context) or distance matrix
  Matrix yhat_context;         // corrected-label second term
  std::vector<int> labels_cur; // corrected-label running assignment
  std::vector<int> unlabeled;  // D_U
};

std::vector<int> weak_hard_labels(const Graph& g, const SplitMasks& masks,
                                  const TrainConfig& cfg) {
  switch (cfg.task) {
    case TaskId::ContextLabel:
    case TaskId::CorrectedLabel: {
      WeakLabels wl = cfg.labeler == Labeler::LP
                          ? label_propagation(g, masks)
                          : ica(g, masks, cfg.ica_rounds, cfg.seed);
      return wl.hard;
    }
    case TaskId::EnsembleLabel: {
      WeakLabels lp = label_propagation(g, masks);
      WeakLabels ic = ica(g, masks, cfg.ica_rounds, cfg.seed);
      return ensemble_labels(lp, ic, g, masks);
    }
    default:
      throw std::logic_error("weak_hard_labels: task has no weak labeler");
  }
}

RunMaterials prepare_materials(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg) {
  RunMaterials m;
  m.unlabeled = unlabeled_nodes(g, masks);
  m.a_task = normalize_adjacency(g);
  m.x_task = g.features;
  m.use_ssl = cfg.lambda > 0.0 && (is_basic_pretext(cfg.task) || is_label_task(cfg.task));

  if (cfg.task == TaskId::GcnPca) {
    m.x_task = task_pca_features(g, cfg.pretext);
  } else if (cfg.task == TaskId::GcnDropped) {
    // Control for EdgeMask: plain GCN trained (and evaluated) on the
    // masked graph, sharing the EdgeMask sampling stream.
    EdgePairsTarget t = edgemask_setup(g, cfg.pretext.m_e, cfg.seed);
    m.a_task = normalize_adjacency(t.masked);
  }

  if (!m.use_ssl) return m;

  if (is_basic_pretext(cfg.task)) {
    const PretextKind kind = basic_kind(cfg.task);
    m.pretext = build_pretext_target(kind, g, masks, cfg.pretext, cfg.seed);
    m.ssl_dim = ssl_output_dim(*m.pretext);
    m.separate_ssl_forward = needs_separate_ssl_forward(kind);
    if (kind == PretextKind::EdgeMask) {
      m.a_ssl = normalize_adjacency(std::get<EdgePairsTarget>(*m.pretext).masked);
      m.x_ssl = m.x_task;
    } else if (kind == PretextKind::AttributeMask) {
      const auto& t = std::get<AttrMaskTarget>(*m.pretext);
      // Both branches consume PCA features; the SSL branch sees them masked.
      m.x_task = t.pca_features;
      m.x_ssl = t.ssl_input;
      m.a_ssl = m.a_task;
    }
    return m;
  }

  // Label tasks.
  if (cfg.task == TaskId::Distance2Labeled) {
    m.ssl_targets = distance2labeled_targets(g, masks);
    m.ssl_dim = 3 * g.num_classes;
    return m;
  }
  std::vector<int> labels_all = weak_hard_labels(g, masks, cfg);
  m.ssl_targets = context_label_targets(g, labels_all, cfg.context_hops);
  m.ssl_dim = g.num_classes;
  if (cfg.task == TaskId::CorrectedLabel) {
    m.labels_cur = std::move(labels_all);
    m.yhat_context = m.ssl_targets;  // round 1: corrected labels start as weak labels
  }
  return m;
}

struct EpochOutcome {
  double joint_loss = 0.0;
};

EpochOutcome run_train_epoch(const SplitMasks& masks, const TrainConfig& cfg,
                             const ArchConfig& arch, RunMaterials& m, ModelParams& params,
                             AdamState& adam, const std::vector<int>& effective_labels,
                             std::uint64_t epoch) {
  ad::Tape tape;
  ParamVars pv = stage_params(tape, params);
  ad::Var x = tape.constant(m.x_task);
  ad::Var z = forward_extract(m.a_task, x, pv, arch, /*train=*/true, cfg.seed, epoch, "x");
  ad::Var logits = forward_classify(m.a_task, z, pv, arch, /*train=*/true, cfg.seed, epoch);
  ad::Var total = ad::softmax_cross_entropy(logits, effective_labels, masks.train);

  if (m.use_ssl) {
    ad::Var z_ssl = z;
    if (m.separate_ssl_forward) {
      ad::Var xs = tape.constant(m.x_ssl);
      z_ssl = forward_extract(m.a_ssl, xs, pv, arch, /*train=*/true, cfg.seed, epoch, "xs");
    }
    ad::Var ssl_loss;
    if (m.pretext) {
      ssl_loss = pretext_ssl_loss(tape, *m.pretext, z_ssl, pv, arch, m.unlabeled,
                                  /*train=*/true, cfg.seed, epoch);
    } else {
      ad::Var out = forward_ssl(z_ssl, pv, arch, /*train=*/true, cfg.seed, epoch);
      if (cfg.task == TaskId::CorrectedLabel) {
        ssl_loss = corrected_context_loss(out, m.ssl_targets, m.yhat_context, cfg.alpha,
                                          m.unlabeled);
      } else {
        ssl_loss = ad::mse_rows(out, m.ssl_targets, m.unlabeled);
      }
    }
    total = ad::add(total, ad::scale(ssl_loss, cfg.lambda));
  }

  tape.backward(total);
  ParamGroup group = collect_params(params, pv, /*extractor=*/true, /*task=*/true,
                                    /*ssl=*/m.use_ssl);
  if (!adam.initialized()) adam.init(group.params);
  std::vector<Matrix> grads;
  grads.reserve(group.vars.size());
  for (const ad::Var* v : group.vars) grads.push_back(v->grad());
  adam_step(group.params, grads, group.decay, adam, cfg.lr, cfg.weight_decay);
  return {total.value()(0, 0)};
}

RunResult train_joint_impl(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg,
                           const std::vector<int>* labels_override, std::uint64_t init_round,
                           ModelParams* best_params_out = nullptr) {
  if (cfg.lambda < 0.0) throw std::invalid_argument("train_joint: lambda must be >= 0");
  validate_split(g, masks);
  const ArchConfig arch = cfg.arch();
  RunMaterials m = prepare_materials(g, masks, cfg);
  const std::vector<int>& effective_labels = labels_override ? *labels_override : g.labels;

  ModelParams params = init_params(arch, static_cast<int>(m.x_task.cols()), g.num_classes,
                                   m.use_ssl ? m.ssl_dim : 0, cfg.seed, init_round);
  AdamState adam;

  RunResult result;
  result.seed = cfg.seed;
  result.config = cfg.to_json();
  result.best_val_acc = -1.0;

  ModelParams best_params = params;
  const int rounds = std::max(1, cfg.correct_rounds);
  const int epochs_per_round = std::max(1, cfg.epochs / rounds);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Corrected-label phase boundary: refresh prototypes and the corrected
    // context distributions from current eval-mode embeddings.
    if (cfg.task == TaskId::CorrectedLabel && m.use_ssl && epoch > 0 &&
        epoch % epochs_per_round == 0 && epoch / epochs_per_round < rounds) {
      EvalOutput eval = evaluate_model(m.a_task, m.x_task, params, arch);
      m.labels_cur = correct_labels(
          eval.z, m.labels_cur, masks, g.num_classes, cfg.correct_m, cfg.correct_p,
          derive_seed(cfg.seed, "correct/round", static_cast<std::uint64_t>(epoch)));
      m.yhat_context = context_label_targets(g, m.labels_cur, cfg.context_hops);
    }

    EpochOutcome outcome;
    try {
      outcome = run_train_epoch(masks, cfg, arch, m, params, adam, effective_labels,
                                static_cast<std::uint64_t>(epoch));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training aborted at epoch " + std::to_string(epoch) +
                               " (task=" + task_name(cfg.task) +
                               ", lambda=" + std::to_string(cfg.lambda) + "): " + e.what());
    }
    result.joint_loss.push_back(outcome.joint_loss);

    EvalOutput eval = evaluate_model(m.a_task, m.x_task, params, arch);
    result.train_loss.push_back(ce_loss_eval(eval.logits, effective_labels, masks.train));
    result.val_loss.push_back(ce_loss_eval(eval.logits, g.labels, masks.val));
    result.train_acc.push_back(accuracy(eval.logits, effective_labels, masks.train));
    const double val_acc = accuracy(eval.logits, g.labels, masks.val);
    result.val_acc.push_back(val_acc);

    if (val_acc > result.best_val_acc) {
      result.best_val_acc = val_acc;
      result.best_epoch = epoch;
      best_params = params;
    }
    if (cfg.patience > 0 && epoch - result.best_epoch >= cfg.patience) break;
  }

  // Test accuracy: computed once, at the best-validation model state.
  EvalOutput final_eval = evaluate_model(m.a_task, m.x_task, best_params, arch);
  result.test_acc = accuracy(final_eval.logits, g.labels, masks.test);
  if (best_params_out) *best_params_out = std::move(best_params);
  return result;
}

}  // namespace

EvalOutput evaluate_model(const SpMatrix& a_hat, const Matrix& x, const ModelParams& params,
                          const ArchConfig& arch) {
  ad::Tape tape;
  ParamVars pv = stage_params(tape, params, /*trainable=*/false);
  ad::Var xv = tape.constant(x);
  ad::Var z = forward_extract(a_hat, xv, pv, arch, /*train=*/false, 0, 0, "x");
  ad::Var logits = forward_classify(a_hat, z, pv, arch, /*train=*/false, 0, 0);
  return {z.value(), logits.value()};
}

RunResult train_joint(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg) {
  return train_joint_impl(g, masks, cfg, nullptr, 0);
}

RunResult train_joint_capture(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg,
                              ModelParams* best_params_out) {
  return train_joint_impl(g, masks, cfg, nullptr, 0, best_params_out);
}

RunResult train_two_stage(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg) {
  if (cfg.two_stage == TwoStageStrategy::None) {
    throw std::invalid_argument("train_two_stage: strategy must be fix or tune_all");
  }
  validate_split(g, masks);
  const ArchConfig arch1 = cfg.pretrain_arch();
  const ArchConfig arch2 = cfg.arch();

  // Stage 1: optimize L_self alone over theta_z and theta_s.
  TrainConfig stage1_cfg = cfg;
  stage1_cfg.lambda = std::max(cfg.lambda, 1.0);  // any positive value; loss is SSL-only
  RunMaterials m = prepare_materials(g, masks, stage1_cfg);
  if (!m.use_ssl) {
    throw std::invalid_argument("train_two_stage: task '" + task_name(cfg.task) +
                                "' provides no pretext to pretrain on");
  }
  const Matrix& x_ssl = m.separate_ssl_forward ? m.x_ssl : m.x_task;
  const SpMatrix& a_ssl = m.separate_ssl_forward ? m.a_ssl : m.a_task;
  ModelParams params1 = init_params(arch1, static_cast<int>(x_ssl.cols()), g.num_classes,
                                    m.ssl_dim, cfg.seed, 0);
  AdamState adam1;
  const int pretrain_epochs = cfg.pretrain_epochs >= 0 ? cfg.pretrain_epochs : cfg.epochs;
  const int rounds = std::max(1, cfg.correct_rounds);
  const int epochs_per_round = std::max(1, pretrain_epochs / rounds);
  for (int epoch = 0; epoch < pretrain_epochs; ++epoch) {
    if (cfg.task == TaskId::CorrectedLabel && epoch > 0 && epoch % epochs_per_round == 0 &&
        epoch / epochs_per_round < rounds) {
      EvalOutput eval = evaluate_model(a_ssl, x_ssl, params1, arch1);
      m.labels_cur = correct_labels(
          eval.z, m.labels_cur, masks, g.num_classes, cfg.correct_m, cfg.correct_p,
          derive_seed(cfg.seed, "correct/round", static_cast<std::uint64_t>(epoch)));
      m.yhat_context = context_label_targets(g, m.labels_cur, cfg.context_hops);
    }
    ad::Tape tape;
    ParamVars pv = stage_params(tape, params1);
    ad::Var xv = tape.constant(x_ssl);
    ad::Var z = forward_extract(a_ssl, xv, pv, arch1, /*train=*/true, cfg.seed,
                                static_cast<std::uint64_t>(epoch), "xs");
    ad::Var ssl_loss;
    if (m.pretext) {
      ssl_loss = pretext_ssl_loss(tape, *m.pretext, z, pv, arch1, m.unlabeled, /*train=*/true,
                                  cfg.seed, static_cast<std::uint64_t>(epoch));
    } else {
      ad::Var out = forward_ssl(z, pv, arch1, /*train=*/true, cfg.seed,
                                static_cast<std::uint64_t>(epoch));
      ssl_loss = cfg.task == TaskId::CorrectedLabel
                     ? corrected_context_loss(out, m.ssl_targets, m.yhat_context, cfg.alpha,
                                              m.unlabeled)
                     : ad::mse_rows(out, m.ssl_targets, m.unlabeled);
    }
    tape.backward(ssl_loss);
    ParamGroup group = collect_params(params1, pv, true, /*task=*/false, /*ssl=*/true);
    if (!adam1.initialized()) adam1.init(group.params);
    std::vector<Matrix> grads;
    for (const ad::Var* v : group.vars) grads.push_back(v->grad());
    adam_step(group.params, grads, group.decay, adam1, cfg.lr, cfg.weight_decay);
  }

  // Hand theta_z across through the checkpoint interface.
  std::string ckpt = cfg.checkpoint_path;
  bool temp_ckpt = false;
  if (ckpt.empty()) {
    ckpt = (std::filesystem::temp_directory_path() /
            ("ssgnn_ckpt_" + std::to_string(derive_seed(cfg.seed, task_name(cfg.task))) + "_" +
             std::to_string(reinterpret_cast<std::uintptr_t>(&params1)) + ".bin"))
               .string();
    temp_ckpt = true;
  }
  save_extractor_checkpoint(ckpt, arch1, params1);

  // Stage 2: downstream training from the pretrained extractor.
  const Matrix& x_task = m.x_task;
  ModelParams params2 = init_params(arch2, static_cast<int>(x_task.cols()), g.num_classes, 0,
                                    cfg.seed, 0);
  load_extractor_checkpoint(ckpt, arch2, params2);
  if (temp_ckpt) std::filesystem::remove(ckpt);

  const bool tune_extractor = cfg.two_stage == TwoStageStrategy::TuneAll;
  AdamState adam2;
  RunResult result;
  result.seed = cfg.seed;
  result.config = cfg.to_json();
  result.best_val_acc = -1.0;
  ModelParams best_params = params2;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    ParamVars pv = stage_params(tape, params2, /*trainable=*/true,
                                /*trainable_extractor=*/tune_extractor);
    ad::Var xv = tape.constant(x_task);
    ad::Var z = forward_extract(m.a_task, xv, pv, arch2, /*train=*/true, cfg.seed,
                                static_cast<std::uint64_t>(epoch), "x");
    ad::Var logits = forward_classify(m.a_task, z, pv, arch2, /*train=*/true, cfg.seed,
                                      static_cast<std::uint64_t>(epoch));
    ad::Var loss = ad::softmax_cross_entropy(logits, g.labels, masks.train);
    tape.backward(loss);
    ParamGroup group = collect_params(params2, pv, tune_extractor, /*task=*/true,
                                      /*ssl=*/false);
    if (!adam2.initialized()) adam2.init(group.params);
    std::vector<Matrix> grads;
    for (const ad::Var* v : group.vars) grads.push_back(v->grad());
    adam_step(group.params, grads, group.decay, adam2, cfg.lr, cfg.weight_decay);

    result.joint_loss.push_back(loss.value()(0, 0));
    EvalOutput eval = evaluate_model(m.a_task, x_task, params2, arch2);
    result.train_loss.push_back(ce_loss_eval(eval.logits, g.labels, masks.train));
    result.val_loss.push_back(ce_loss_eval(eval.logits, g.labels, masks.val));
    result.train_acc.push_back(accuracy(eval.logits, g.labels, masks.train));
    const double val_acc = accuracy(eval.logits, g.labels, masks.val);
    result.val_acc.push_back(val_acc);
    if (val_acc > result.best_val_acc) {
      result.best_val_acc = val_acc;
      result.best_epoch = epoch;
      best_params = params2;
    }
    if (cfg.patience > 0 && epoch - result.best_epoch >= cfg.patience) break;
  }
  EvalOutput final_eval = evaluate_model(m.a_task, x_task, best_params, arch2);
  result.test_acc = accuracy(final_eval.logits, g.labels, masks.test);
  return result;
}

RunResult self_training_baseline(const Graph& g, const SplitMasks& masks,
                                 const TrainConfig& cfg) {
  validate_split(g, masks);
  TrainConfig base = cfg;
  base.task = TaskId::Gcn;
  base.lambda = 0.0;
  ModelParams round1_best;
  RunResult round1 = train_joint_impl(g, masks, base, nullptr, 0, &round1_best);

  int k = cfg.confidence_k;
  if (k < 0) {
    // Default: twice the per-class training budget.
    k = 2 * static_cast<int>((masks.train.size() + static_cast<std::size_t>(g.num_classes) - 1) /
                             static_cast<std::size_t>(g.num_classes));
  }
  if (k == 0) {
    RunResult out = round1;
    out.config = cfg.to_json();
    return out;
  }

  // Candidates: nodes outside every mask, so the augmented split stays disjoint.
  std::vector<char> reserved(static_cast<std::size_t>(g.num_nodes), 0);
  for (int v : masks.train) reserved[static_cast<std::size_t>(v)] = 1;
  for (int v : masks.val) reserved[static_cast<std::size_t>(v)] = 1;
  for (int v : masks.test) reserved[static_cast<std::size_t>(v)] = 1;

  // Predictions from the round-1 best model state.
  const ArchConfig arch = base.arch();
  const SpMatrix a_hat = normalize_adjacency(g);
  EvalOutput eval = evaluate_model(a_hat, g.features, round1_best, arch);
  Matrix probs = softmax_rows(eval.logits);

  struct Candidate {
    double confidence;
    int node;
  };
  std::vector<std::vector<Candidate>> per_class(static_cast<std::size_t>(g.num_classes));
  for (int v = 0; v < g.num_nodes; ++v) {
    if (reserved[static_cast<std::size_t>(v)]) continue;
    const int c = argmax_row(probs, v);
    per_class[static_cast<std::size_t>(c)].push_back({probs(v, c), v});
  }
  std::vector<int> pseudo_nodes;
  std::vector<int> labels2 = g.labels;
  for (int c = 0; c < g.num_classes; ++c) {
    auto& cands = per_class[static_cast<std::size_t>(c)];
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return a.node < b.node;
    });
    for (int i = 0; i < std::min<int>(k, static_cast<int>(cands.size())); ++i) {
      pseudo_nodes.push_back(cands[static_cast<std::size_t>(i)].node);
      labels2[static_cast<std::size_t>(cands[static_cast<std::size_t>(i)].node)] = c;
    }
  }
  if (pseudo_nodes.empty()) {
    RunResult out = round1;
    out.config = cfg.to_json();
    return out;
  }

  SplitMasks masks2 = masks;
  masks2.train.insert(masks2.train.end(), pseudo_nodes.begin(), pseudo_nodes.end());
  std::sort(masks2.train.begin(), masks2.train.end());

  RunResult result = train_joint_impl(g, masks2, base, &labels2, /*init_round=*/1);
  result.config = cfg.to_json();
  result.config["pseudo_label_count"] = pseudo_nodes.size();
  return result;
}

RunResult run_training(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg) {
  if (cfg.task == TaskId::SelfTraining) return self_training_baseline(g, masks, cfg);
  if (cfg.two_stage != TwoStageStrategy::None) {
    if (is_baseline(cfg.task)) {
      throw std::invalid_argument("two-stage training requires a pretext task");
    }
    return train_two_stage(g, masks, cfg);
  }
  return train_joint(g, masks, cfg);
}

SplitMasks few_label_split(const Graph& g, int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw std::invalid_argument("few_label_split: n must be >= 1");
  RngStream rng(seed, "fewlabel");
  SplitMasks masks;
  std::vector<char> taken(static_cast<std::size_t>(g.num_nodes), 0);
  for (int c = 0; c < g.num_classes; ++c) {
    std::vector<int> members;
    for (int v = 0; v < g.num_nodes; ++v) {
      if (g.labels[static_cast<std::size_t>(v)] == c) members.push_back(v);
    }
    if (static_cast<int>(members.size()) < 2 * n_per_class) {
      throw std::runtime_error("few_label_split: class " + std::to_string(c) + " has only " +
                               std::to_string(members.size()) + " labeled nodes, need " +
                               std::to_string(2 * n_per_class));
    }
    auto picks = rng.sample_without_replacement(static_cast<int>(members.size()),
                                                2 * n_per_class);
    for (int i = 0; i < n_per_class; ++i) {
      const int v = members[static_cast<std::size_t>(picks[static_cast<std::size_t>(i)])];
      masks.train.push_back(v);
      taken[static_cast<std::size_t>(v)] = 1;
    }
    for (int i = n_per_class; i < 2 * n_per_class; ++i) {
      const int v = members[static_cast<std::size_t>(picks[static_cast<std::size_t>(i)])];
      masks.val.push_back(v);
      taken[static_cast<std::size_t>(v)] = 1;
    }
  }
  for (int v = 0; v < g.num_nodes; ++v) {
    if (!taken[static_cast<std::size_t>(v)] && g.labels[static_cast<std::size_t>(v)] != kUnlabeled) {
      masks.test.push_back(v);
    }
  }
  std::sort(masks.train.begin(), masks.train.end());
  std::sort(masks.val.begin(), masks.val.end());
  validate_split(g, masks);
  return masks;
}

double probe_pretext(const Graph& g, const SplitMasks& /*masks*/, PretextKind kind,
                     const Matrix& representation, const PretextConfig& cfg,
                     std::uint64_t seed) {
  if (representation.rows() != g.num_nodes) {
    throw std::invalid_argument("probe_pretext: representation row count mismatch");
  }
  Matrix inputs;
  std::vector<int> labels;
  int num_classes = 0;

  if (kind == PretextKind::NodeProperty) {
    // Degree bins {1, 2, 3, >=4}; degree 0 joins the first bin.
    inputs = representation;
    labels.resize(static_cast<std::size_t>(g.num_nodes));
    for (int v = 0; v < g.num_nodes; ++v) {
      labels[static_cast<std::size_t>(v)] = std::min(std::max(g.degree(v), 1), 4) - 1;
    }
    num_classes = 4;
  } else if (kind == PretextKind::EdgeMask) {
    const int m_e = cfg.m_e > 0 ? cfg.m_e : std::max(1, g.num_nodes / 10);
    EdgePairsTarget t = edgemask_setup(g, std::min(m_e, g.num_edges()), seed);
    const std::size_t p = t.positives.size() + t.negatives.size();
    inputs.resize(static_cast<Eigen::Index>(p), representation.cols());
    labels.reserve(p);
    Eigen::Index r = 0;
    for (auto [u, v] : t.positives) {
      inputs.row(r++) = (representation.row(u) - representation.row(v)).cwiseAbs();
      labels.push_back(1);
    }
    for (auto [u, v] : t.negatives) {
      inputs.row(r++) = (representation.row(u) - representation.row(v)).cwiseAbs();
      labels.push_back(0);
    }
    num_classes = 2;
  } else if (kind == PretextKind::PairwiseDistance) {
    DistPairsTarget t = pairwise_distance_targets(g);
    t.pair_sample = cfg.pair_sample;
    SampledPairs batch = sample_distance_pairs(t, seed, 0);
    inputs.resize(static_cast<Eigen::Index>(batch.left.size()), representation.cols());
    for (std::size_t i = 0; i < batch.left.size(); ++i) {
      inputs.row(static_cast<Eigen::Index>(i)) =
          (representation.row(batch.left[i]) - representation.row(batch.right[i])).cwiseAbs();
    }
    labels = batch.categories;
    num_classes = 4;
  } else {
    throw std::invalid_argument("probe_pretext: unsupported pretext '" +
                                std::to_string(static_cast<int>(kind)) +
                                "' (needs a classification form)");
  }

  const int total = static_cast<int>(labels.size());
  if (total < 5) throw std::runtime_error("probe_pretext: too few instances to split");
  RngStream rng(seed, "probe/split");
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const int n_train = std::max(1, (total * 4) / 5);
  std::vector<int> train_rows(order.begin(), order.begin() + n_train);
  std::vector<int> eval_rows(order.begin() + n_train, order.end());

  SoftmaxRegression clf = fit_softmax_regression(inputs, labels, train_rows, num_classes);
  Matrix probs = softmax_regression_probs(clf, inputs);
  int correct = 0;
  for (int r : eval_rows) {
    if (argmax_row(probs, r) == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(eval_rows.size());
}

}  // namespace ssgnn
