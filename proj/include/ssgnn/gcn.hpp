#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ssgnn/dense.hpp"
#include "ssgnn/optim.hpp"
#include "ssgnn/tape.hpp"

namespace ssgnn {

enum class LayerKind { GraphConv, Linear };

// Extractor/adapter split. Preset names count the layers on the downstream
// path: "2GC" is one graph-conv extractor layer plus one graph-conv task
// adapter, "2GC+1Linear" is a two graph-conv extractor with a linear adapter,
// and so on. The SSL adapter is always a single linear layer.
struct ArchConfig {
  std::vector<LayerKind> extractor;
  LayerKind task_adapter = LayerKind::GraphConv;
  int hidden_dim = 128;
  double dropout = 0.5;
  std::string preset_name = "2GC";

  static ArchConfig preset(std::string_view name);
};

// theta split: theta_z (extractor, one storage shared by both objectives),
// theta_y (task adapter), theta_s (SSL adapter).
struct ModelParams {
  std::vector<Matrix> w_z;
  std::vector<Matrix> b_z;
  Matrix w_y, b_y;
  Matrix w_s, b_s;  // empty when no SSL head is attached
  bool has_ssl = false;
};

ModelParams init_params(const ArchConfig& arch, int in_dim, int num_classes, int ssl_dim,
                        std::uint64_t master_seed, std::uint64_t init_round = 0);

// Parameter leaves staged on a tape for one forward/backward pass.
struct ParamVars {
  std::vector<ad::Var> w_z;
  std::vector<ad::Var> b_z;
  ad::Var w_y, b_y;
  ad::Var w_s, b_s;
};

// trainable_extractor=false stages theta_z as constants (two-stage "fix").
ParamVars stage_params(ad::Tape& tape, const ModelParams& params, bool trainable = true,
                       bool trainable_extractor = true);

// Shared feature extractor. Graph-conv layers compute ReLU(A_hat (H W) + b)
// with dropout on the layer input in train mode; linear layers omit A_hat.
// `stream_tag` keeps dropout streams of independent forwards isolated.
ad::Var forward_extract(const SpMatrix& a_hat, ad::Var x, const ParamVars& pv,
                        const ArchConfig& arch, bool train, std::uint64_t master_seed,
                        std::uint64_t epoch, std::string_view stream_tag = "x");

// Task adapter on the extractor output; raw logits, no activation.
ad::Var forward_classify(const SpMatrix& a_hat, ad::Var z, const ParamVars& pv,
                         const ArchConfig& arch, bool train, std::uint64_t master_seed,
                         std::uint64_t epoch);

// SSL adapter: linear map of z (node-wise pretexts).
ad::Var forward_ssl(ad::Var z, const ParamVars& pv, const ArchConfig& arch, bool train,
                    std::uint64_t master_seed, std::uint64_t epoch);

// SSL adapter on |z_i - z_j| for a pair list (pairwise pretexts).
ad::Var forward_ssl_pairs(ad::Var z, const std::vector<int>& left,
                          const std::vector<int>& right, const ParamVars& pv,
                          const ArchConfig& arch, bool train, std::uint64_t master_seed,
                          std::uint64_t epoch);

// Gradients in a fixed order aligned with param_pointers/decay flags.
struct ParamGroup {
  std::vector<Matrix*> params;
  std::vector<bool> decay;        // weight matrices yes, biases no
  std::vector<const ad::Var*> vars;
};

// include_extractor/include_task/include_ssl select the optimized groups.
ParamGroup collect_params(ModelParams& params, ParamVars& vars, bool include_extractor,
                          bool include_task, bool include_ssl);

// Checkpoint: one-line JSON header (arch preset, names, shapes) followed by
// row-major little-endian 64-bit floats. Used to hand theta_z across the
// two training stages.
void save_extractor_checkpoint(const std::string& path, const ArchConfig& arch,
                               const ModelParams& params);
// Loads theta_z into `params`, failing if layer shapes are incompatible.
void load_extractor_checkpoint(const std::string& path, const ArchConfig& arch,
                               ModelParams& params);

std::uint64_t param_bytes_hash(const ModelParams& params);

}  // namespace ssgnn
