#include "ssgnn/gcn.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ssgnn {

using nlohmann::json;

ArchConfig ArchConfig::preset(std::string_view name) {
  ArchConfig cfg;
  cfg.preset_name = std::string(name);
  if (name == "2GC") {
    cfg.extractor = {LayerKind::GraphConv};
    cfg.task_adapter = LayerKind::GraphConv;
  } else if (name == "1GC+1Linear") {
    cfg.extractor = {LayerKind::GraphConv};
    cfg.task_adapter = LayerKind::Linear;
  } else if (name == "3GC") {
    cfg.extractor = {LayerKind::GraphConv, LayerKind::GraphConv};
    cfg.task_adapter = LayerKind::GraphConv;
  } else if (name == "2GC+1Linear") {
    cfg.extractor = {LayerKind::GraphConv, LayerKind::GraphConv};
    cfg.task_adapter = LayerKind::Linear;
  } else {
    throw std::invalid_argument("unknown architecture preset '" + std::string(name) +
                                "' (expected 2GC, 1GC+1Linear, 3GC or 2GC+1Linear)");
  }
  return cfg;
}

ModelParams init_params(const ArchConfig& arch, int in_dim, int num_classes, int ssl_dim,
                        std::uint64_t master_seed, std::uint64_t init_round) {
  ModelParams p;
  int dim = in_dim;
  for (std::size_t i = 0; i < arch.extractor.size(); ++i) {
    RngStream rng(master_seed, "init/w_z" + std::to_string(i), init_round);
    p.w_z.push_back(glorot_init(dim, arch.hidden_dim, rng));
    p.b_z.push_back(Matrix::Zero(1, arch.hidden_dim));
    dim = arch.hidden_dim;
  }
  {
    RngStream rng(master_seed, "init/w_y", init_round);
    p.w_y = glorot_init(dim, num_classes, rng);
    p.b_y = Matrix::Zero(1, num_classes);
  }
  if (ssl_dim > 0) {
    RngStream rng(master_seed, "init/w_s", init_round);
    p.w_s = glorot_init(dim, ssl_dim, rng);
    p.b_s = Matrix::Zero(1, ssl_dim);
    p.has_ssl = true;
  }
  return p;
}

ParamVars stage_params(ad::Tape& tape, const ModelParams& params, bool trainable,
                       bool trainable_extractor) {
  ParamVars pv;
  for (std::size_t i = 0; i < params.w_z.size(); ++i) {
    pv.w_z.push_back(tape.leaf(params.w_z[i], trainable && trainable_extractor));
    pv.b_z.push_back(tape.leaf(params.b_z[i], trainable && trainable_extractor));
  }
  pv.w_y = tape.leaf(params.w_y, trainable);
  pv.b_y = tape.leaf(params.b_y, trainable);
  if (params.has_ssl) {
    pv.w_s = tape.leaf(params.w_s, trainable);
    pv.b_s = tape.leaf(params.b_s, trainable);
  }
  return pv;
}

namespace {

ad::Var apply_layer(const SpMatrix& a_hat, ad::Var h, ad::Var w, ad::Var b, LayerKind kind,
                    bool activation) {
  ad::Var hw = ad::matmul(h, w);
  if (kind == LayerKind::GraphConv) hw = ad::spmm(a_hat, hw);
  ad::Var out = ad::add_bias(hw, b);
  return activation ? ad::relu(out) : out;
}

}  // namespace

ad::Var forward_extract(const SpMatrix& a_hat, ad::Var x, const ParamVars& pv,
                        const ArchConfig& arch, bool train, std::uint64_t master_seed,
                        std::uint64_t epoch, std::string_view stream_tag) {
  ad::Var h = x;
  for (std::size_t i = 0; i < pv.w_z.size(); ++i) {
    RngStream drop_rng(master_seed, "drop/" + std::string(stream_tag) + "/" + std::to_string(i),
                       epoch);
    h = ad::dropout(h, arch.dropout, train, drop_rng);
    h = apply_layer(a_hat, h, pv.w_z[i], pv.b_z[i], arch.extractor[i], /*activation=*/true);
  }
  return h;
}

ad::Var forward_classify(const SpMatrix& a_hat, ad::Var z, const ParamVars& pv,
                         const ArchConfig& arch, bool train, std::uint64_t master_seed,
                         std::uint64_t epoch) {
  RngStream drop_rng(master_seed, "drop/y", epoch);
  ad::Var zd = ad::dropout(z, arch.dropout, train, drop_rng);
  return apply_layer(a_hat, zd, pv.w_y, pv.b_y, arch.task_adapter, /*activation=*/false);
}

ad::Var forward_ssl(ad::Var z, const ParamVars& pv, const ArchConfig& arch, bool train,
                    std::uint64_t master_seed, std::uint64_t epoch) {
  RngStream drop_rng(master_seed, "drop/s", epoch);
  ad::Var zd = ad::dropout(z, arch.dropout, train, drop_rng);
  return ad::add_bias(ad::matmul(zd, pv.w_s), pv.b_s);
}

ad::Var forward_ssl_pairs(ad::Var z, const std::vector<int>& left,
                          const std::vector<int>& right, const ParamVars& pv,
                          const ArchConfig& arch, bool train, std::uint64_t master_seed,
                          std::uint64_t epoch) {
  ad::Var zi = ad::gather_rows(z, left);
  ad::Var zj = ad::gather_rows(z, right);
  ad::Var diff = ad::abs_elem(ad::sub_elem(zi, zj));
  RngStream drop_rng(master_seed, "drop/s", epoch);
  ad::Var dd = ad::dropout(diff, arch.dropout, train, drop_rng);
  return ad::add_bias(ad::matmul(dd, pv.w_s), pv.b_s);
}

ParamGroup collect_params(ModelParams& params, ParamVars& vars, bool include_extractor,
                          bool include_task, bool include_ssl) {
  ParamGroup group;
  auto push = [&](Matrix& p, const ad::Var& v, bool decay) {
    group.params.push_back(&p);
    group.decay.push_back(decay);
    group.vars.push_back(&v);
  };
  if (include_extractor) {
    for (std::size_t i = 0; i < params.w_z.size(); ++i) {
      push(params.w_z[i], vars.w_z[i], true);
      push(params.b_z[i], vars.b_z[i], false);
    }
  }
  if (include_task) {
    push(params.w_y, vars.w_y, true);
    push(params.b_y, vars.b_y, false);
  }
  if (include_ssl && params.has_ssl) {
    push(params.w_s, vars.w_s, true);
    push(params.b_s, vars.b_s, false);
  }
  return group;
}

namespace {

void write_matrix_row_major(std::ofstream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
}

void read_matrix_row_major(std::ifstream& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      m(i, j) = v;
    }
  }
}

}  // namespace

void save_extractor_checkpoint(const std::string& path, const ArchConfig& arch,
                               const ModelParams& params) {
  json header;
  header["format"] = "ssgnn-checkpoint";
  header["version"] = 1;
  header["arch"] = arch.preset_name;
  json names = json::array();
  json shapes = json::array();
  for (std::size_t i = 0; i < params.w_z.size(); ++i) {
    names.push_back("w_z" + std::to_string(i));
    shapes.push_back({params.w_z[i].rows(), params.w_z[i].cols()});
    names.push_back("b_z" + std::to_string(i));
    shapes.push_back({params.b_z[i].rows(), params.b_z[i].cols()});
  }
  header["names"] = std::move(names);
  header["shapes"] = std::move(shapes);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < params.w_z.size(); ++i) {
    write_matrix_row_major(out, params.w_z[i]);
    write_matrix_row_major(out, params.b_z[i]);
  }
}

void load_extractor_checkpoint(const std::string& path, const ArchConfig& arch,
                               ModelParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::string header_line;
  std::getline(in, header_line);
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: bad header: " + std::string(e.what()));
  }
  if (header.value("format", "") != "ssgnn-checkpoint") {
    throw std::runtime_error("checkpoint: unrecognized format");
  }
  const auto& shapes = header.at("shapes");
  if (shapes.size() != 2 * params.w_z.size()) {
    throw std::runtime_error(
        "checkpoint: extractor depth mismatch (checkpoint has " +
        std::to_string(shapes.size() / 2) + " layers, architecture '" + arch.preset_name +
        "' expects " + std::to_string(params.w_z.size()) + ")");
  }
  for (std::size_t i = 0; i < params.w_z.size(); ++i) {
    const auto ws = shapes.at(2 * i);
    const auto bs = shapes.at(2 * i + 1);
    if (ws.at(0).get<Eigen::Index>() != params.w_z[i].rows() ||
        ws.at(1).get<Eigen::Index>() != params.w_z[i].cols() ||
        bs.at(1).get<Eigen::Index>() != params.b_z[i].cols()) {
      throw std::runtime_error("checkpoint: layer " + std::to_string(i) +
                               " shape incompatible with target architecture");
    }
  }
  for (std::size_t i = 0; i < params.w_z.size(); ++i) {
    read_matrix_row_major(in, params.w_z[i]);
    read_matrix_row_major(in, params.b_z[i]);
  }
  if (!in) throw std::runtime_error("checkpoint: truncated payload in '" + path + "'");
}

std::uint64_t param_bytes_hash(const ModelParams& params) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&](const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
          h ^= b;
          h *= 0x100000001B3ULL;
        }
      }
    }
  };
  for (const auto& m : params.w_z) mix(m);
  for (const auto& m : params.b_z) mix(m);
  mix(params.w_y);
  mix(params.b_y);
  if (params.has_ssl) {
    mix(params.w_s);
    mix(params.b_s);
  }
  return h;
}

}  // namespace ssgnn
