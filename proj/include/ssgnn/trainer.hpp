#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssgnn/gcn.hpp"
#include "ssgnn/graph.hpp"
#include "ssgnn/label_tasks.hpp"
#include "ssgnn/pretext.hpp"

#include <json.hpp>

namespace ssgnn {

enum class TaskId {
  Gcn,
  GcnDropped,
  GcnPca,
  SelfTraining,
  NodeProperty,
  EdgeMask,
  PairwiseDistance,
  Distance2Clusters,
  AttributeMask,
  PairwiseAttrSim,
  Distance2Labeled,
  ContextLabel,
  EnsembleLabel,
  CorrectedLabel,
};

enum class Labeler { LP, ICA };
enum class TwoStageStrategy { None, Fix, TuneAll };

std::string task_name(TaskId task);
TaskId task_from_name(const std::string& name);
bool is_baseline(TaskId task);

struct TrainConfig {
  int epochs = 200;
  double lr = 0.01;
  double weight_decay = 5e-4;
  int hidden = 128;
  double dropout = 0.5;
  double lambda = 0.0;   // SSL weight; 0 degenerates to plain GCN
  double alpha = 1.0;    // corrected-context weight
  TaskId task = TaskId::Gcn;
  Labeler labeler = Labeler::LP;
  int context_hops = 2;
  int ica_rounds = 10;
  int correct_rounds = 3;       // training/correction phase alternations
  int correct_m = 100;          // per-class sample size for the density estimate
  int correct_p = 5;            // prototypes per class
  std::string arch_preset = "2GC";
  std::string pretrain_arch_preset;  // two-stage stage 1; empty = arch_preset
  int pretrain_epochs = -1;          // two-stage stage 1; -1 = epochs
  TwoStageStrategy two_stage = TwoStageStrategy::None;
  std::uint64_t seed = 0;
  int patience = 0;       // early stopping on val accuracy; 0 disables
  int confidence_k = 0;   // self-training additions per class; 0 = derived default
  PretextConfig pretext;
  std::string checkpoint_path;  // two-stage handoff; empty = temp file

  ArchConfig arch() const;
  ArchConfig pretrain_arch() const;
  nlohmann::json to_json() const;
};

struct RunResult {
  std::vector<double> train_loss;  // task CE on the train mask, eval mode
  std::vector<double> val_loss;
  std::vector<double> train_acc;
  std::vector<double> val_acc;
  std::vector<double> joint_loss;  // optimized total per epoch (train mode)
  double test_acc = 0.0;
  int best_epoch = -1;
  double best_val_acc = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

// Joint training: one full-graph forward through the shared extractor and
// both adapters per epoch, one Adam step on L_task + lambda * L_self.
RunResult train_joint(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg);

// As train_joint, additionally returning the best-validation parameter state
// (used by the representation probe and the self-training baseline).
RunResult train_joint_capture(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg,
                              ModelParams* best_params_out);

// Stage 1 optimizes L_self alone over theta_z and theta_s; stage 2 restores
// theta_z through the checkpoint interface and trains the downstream task
// with theta_z frozen ("fix") or trainable ("tune_all").
RunResult train_two_stage(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg);

// Trains plain GCN, adds the most confident unlabeled predictions per class
// as pseudo-labels, retrains from scratch on the augmented label set.
RunResult self_training_baseline(const Graph& g, const SplitMasks& masks,
                                 const TrainConfig& cfg);

// Dispatches on cfg.task / cfg.two_stage.
RunResult run_training(const Graph& g, const SplitMasks& masks, const TrainConfig& cfg);

// n train plus n val nodes per class, disjoint; all remaining labeled nodes
// become the test set. Deterministic per seed.
SplitMasks few_label_split(const Graph& g, int n_per_class, std::uint64_t seed);

// Freezes `representation` (one row per node), trains a logistic-regression
// probe on the pretext's classification form with an 80/20 instance split and
// returns held-out accuracy. Supports NodeProperty (degree bins 1,2,3,>=4),
// EdgeMask and PairwiseDistance (inputs |r_i - r_j|).
double probe_pretext(const Graph& g, const SplitMasks& masks, PretextKind kind,
                     const Matrix& representation, const PretextConfig& cfg,
                     std::uint64_t seed);

// Eval-mode extractor output and logits for trained parameters.
struct EvalOutput {
  Matrix z;
  Matrix logits;
};
EvalOutput evaluate_model(const SpMatrix& a_hat, const Matrix& x, const ModelParams& params,
                          const ArchConfig& arch);

double accuracy(const Matrix& logits, const std::vector<int>& labels,
                const std::vector<int>& mask);

}  // namespace ssgnn
