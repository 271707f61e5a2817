#include "artdiff/artgraph.hpp"

#include <cmath>
#include <stdexcept>

namespace artdiff {

int GraphConfig::edge_index(int i, int j) const {
  if (!(0 <= i && i < j && j < max_parts)) {
    throw std::out_of_range("edge (" + std::to_string(i) + "," + std::to_string(j) +
                            ") is not a stored upper-triangle pair");
  }
  // rows 0..i-1 contribute (K-1) + (K-2) + ... + (K-i) entries
  return i * (2 * max_parts - i - 1) / 2 + (j - i - 1);
}

std::pair<int, int> GraphConfig::edge_endpoints(int index) const {
  for (int i = 0; i < max_parts; ++i) {
    const int row = max_parts - i - 1;
    if (index < row) return {i, i + 1 + index};
    index -= row;
  }
  throw std::out_of_range("edge index out of range");
}

void GraphConfig::validate() const {
  if (max_parts < 2) throw std::invalid_argument("graph capacity K must be at least 2");
  if (latent_dim < 0) throw std::invalid_argument("latent width must be non-negative");
}

NodeChannels::NodeChannels(const GraphConfig& cfg) {
  rotation = cfg.include_rotation ? 4 : -1;
  bbox = 1 + cfg.pose_dim();
  latent = bbox + 3;
}

ArticulationGraph::ArticulationGraph(const GraphConfig& cfg)
    : config_(cfg), nodes_(cfg.max_parts), edges_(cfg.edge_count()) {
  cfg.validate();
  for (auto& n : nodes_) n.latent = Eigen::VectorXd::Zero(cfg.latent_dim);
}

EdgeAttr& ArticulationGraph::edge(int i, int j) { return edges_[config_.edge_index(i, j)]; }
const EdgeAttr& ArticulationGraph::edge(int i, int j) const {
  return edges_[config_.edge_index(i, j)];
}

EdgeAttr ArticulationGraph::oriented_edge(int a, int b) const {
  if (a < b) return edge(a, b);
  EdgeAttr e = edge(b, a);
  e.axis = -e.axis;
  return e;
}

Eigen::VectorXd flatten(const ArticulationGraph& graph) {
  const GraphConfig& cfg = graph.config();
  const NodeChannels nc(cfg);
  Eigen::VectorXd x(cfg.flat_dim());
  for (int i = 0; i < cfg.max_parts; ++i) {
    const NodeAttr& n = graph.node(i);
    if (n.latent.size() != cfg.latent_dim) {
      throw std::invalid_argument("node " + std::to_string(i) + " latent width " +
                                  std::to_string(n.latent.size()) + " != " +
                                  std::to_string(cfg.latent_dim));
    }
    const int o = cfg.node_offset(i);
    x[o + NodeChannels::kExists] = n.exists;
    x.segment<3>(o + NodeChannels::kTranslation) = n.translation;
    if (cfg.include_rotation) x.segment<3>(o + nc.rotation) = n.rotation;
    x.segment<3>(o + nc.bbox) = n.bbox;
    x.segment(o + nc.latent, cfg.latent_dim) = n.latent;
  }
  for (int k = 0; k < cfg.edge_count(); ++k) {
    const auto [i, j] = cfg.edge_endpoints(k);
    const EdgeAttr& e = graph.edge(i, j);
    const int o = cfg.edge_offset(i, j);
    x[o + EdgeChannels::kChirality] = e.chirality;
    x.segment<6>(o + EdgeChannels::kDirection) = e.axis;
    x[o + EdgeChannels::kPrismatic] = e.prismatic.lo;
    x[o + EdgeChannels::kPrismatic + 1] = e.prismatic.hi;
    x[o + EdgeChannels::kRevolute] = e.revolute.lo;
    x[o + EdgeChannels::kRevolute + 1] = e.revolute.hi;
  }
  return x;
}

ArticulationGraph unflatten(const Eigen::VectorXd& x, const GraphConfig& cfg) {
  if (x.size() != cfg.flat_dim()) {
    throw std::invalid_argument("flat vector has length " + std::to_string(x.size()) +
                                ", expected " + std::to_string(cfg.flat_dim()));
  }
  ArticulationGraph g(cfg);
  const NodeChannels nc(cfg);
  for (int i = 0; i < cfg.max_parts; ++i) {
    NodeAttr& n = g.node(i);
    const int o = cfg.node_offset(i);
    n.exists = x[o + NodeChannels::kExists];
    n.translation = x.segment<3>(o + NodeChannels::kTranslation);
    if (cfg.include_rotation) n.rotation = x.segment<3>(o + nc.rotation);
    n.bbox = x.segment<3>(o + nc.bbox);
    n.latent = x.segment(o + nc.latent, cfg.latent_dim);
  }
  for (int k = 0; k < cfg.edge_count(); ++k) {
    const auto [i, j] = cfg.edge_endpoints(k);
    EdgeAttr& e = g.edge(i, j);
    const int o = cfg.edge_offset(i, j);
    e.chirality = x[o + EdgeChannels::kChirality];
    e.axis = x.segment<6>(o + EdgeChannels::kDirection);
    e.prismatic = {x[o + EdgeChannels::kPrismatic], x[o + EdgeChannels::kPrismatic + 1]};
    e.revolute = {x[o + EdgeChannels::kRevolute], x[o + EdgeChannels::kRevolute + 1]};
  }
  return g;
}

std::vector<std::string> channel_layout(const GraphConfig& cfg) {
  std::vector<std::string> names;
  names.reserve(cfg.flat_dim());
  const char* xyz[] = {"x", "y", "z"};
  for (int i = 0; i < cfg.max_parts; ++i) {
    const std::string p = "node" + std::to_string(i) + ".";
    names.push_back(p + "exists");
    for (auto a : xyz) names.push_back(p + "pos." + a);
    if (cfg.include_rotation) {
      for (auto a : xyz) names.push_back(p + "rot." + a);
    }
    for (auto a : xyz) names.push_back(p + "bbox." + a);
    for (int f = 0; f < cfg.latent_dim; ++f) names.push_back(p + "latent." + std::to_string(f));
  }
  for (int k = 0; k < cfg.edge_count(); ++k) {
    const auto [i, j] = cfg.edge_endpoints(k);
    const std::string p = "edge" + std::to_string(i) + "_" + std::to_string(j) + ".";
    names.push_back(p + "c");
    for (auto a : xyz) names.push_back(p + "l." + a);
    for (auto a : xyz) names.push_back(p + "m." + a);
    names.push_back(p + "prismatic.lo");
    names.push_back(p + "prismatic.hi");
    names.push_back(p + "revolute.lo");
    names.push_back(p + "revolute.hi");
  }
  return names;
}

std::vector<ChannelKind> channel_kinds(const GraphConfig& cfg) {
  std::vector<ChannelKind> kinds(cfg.flat_dim(), ChannelKind::kContinuous);
  for (int i = 0; i < cfg.max_parts; ++i) {
    kinds[cfg.node_offset(i) + NodeChannels::kExists] = ChannelKind::kExistence;
  }
  for (int k = 0; k < cfg.edge_count(); ++k) {
    const auto [i, j] = cfg.edge_endpoints(k);
    kinds[cfg.edge_offset(i, j) + EdgeChannels::kChirality] = ChannelKind::kChirality;
  }
  return kinds;
}

ArticulationGraph encode_object(const ArticulatedObject& obj, const GraphConfig& cfg) {
  if (static_cast<int>(obj.parts.size()) > cfg.max_parts) {
    throw std::invalid_argument("object has " + std::to_string(obj.parts.size()) +
                                " parts, capacity is " + std::to_string(cfg.max_parts));
  }
  validate_tree(obj);
  ArticulationGraph g(cfg);
  for (std::size_t i = 0; i < obj.parts.size(); ++i) {
    const Part& p = obj.parts[i];
    NodeAttr& n = g.node(static_cast<int>(i));
    n.exists = 1.0;
    n.translation = p.translation;
    n.rotation = cfg.include_rotation ? p.rotation : Vec3::Zero();
    n.bbox = p.bbox;
    if (p.latent.size() == cfg.latent_dim) {
      n.latent = p.latent;
    } else if (p.latent.size() != 0) {
      throw std::invalid_argument("part " + std::to_string(i) + " latent width " +
                                  std::to_string(p.latent.size()) + " != " +
                                  std::to_string(cfg.latent_dim));
    }
  }
  for (const Joint& j : obj.joints) {
    const int lo = std::min(j.parent, j.child);
    const int hi = std::max(j.parent, j.child);
    EdgeAttr& e = g.edge(lo, hi);
    const bool forward = j.parent == lo;
    e.chirality = forward ? 1.0 : -1.0;
    e.axis = forward ? j.axis.as_vector() : j.axis.reversed().as_vector();
    e.prismatic = j.prismatic;
    e.revolute = j.revolute;
  }
  return g;
}

NormalizationStats compute_stats(const std::vector<Eigen::VectorXd>& train, const GraphConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("cannot compute statistics on an empty split");
  const int dim = cfg.flat_dim();
  const auto kinds = channel_kinds(cfg);
  NormalizationStats s;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.scale = Eigen::VectorXd::Ones(dim);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const auto& x : train) {
    if (x.size() != dim) throw std::invalid_argument("training vector has the wrong length");
    sum += x;
  }
  const double n = static_cast<double>(train.size());
  const Eigen::VectorXd mean = sum / n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& x : train) var += (x - mean).cwiseAbs2();
  var /= n;
  for (int c = 0; c < dim; ++c) {
    switch (kinds[c]) {
      case ChannelKind::kExistence:
        s.mean[c] = 0.5;
        s.scale[c] = 0.5;
        break;
      case ChannelKind::kChirality:
        s.mean[c] = 0.0;
        s.scale[c] = 1.0;
        break;
      case ChannelKind::kContinuous:
        s.mean[c] = mean[c];
        s.scale[c] = std::max(std::sqrt(var[c]), NormalizationStats::kMinScale);
        break;
    }
  }
  return s;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& x, const NormalizationStats& stats) {
  if (x.size() != stats.mean.size()) throw std::invalid_argument("normalize: length mismatch");
  return ((x - stats.mean).array() / stats.scale.array()).matrix();
}

Eigen::VectorXd denormalize(const Eigen::VectorXd& x_hat, const NormalizationStats& stats) {
  if (x_hat.size() != stats.mean.size()) throw std::invalid_argument("denormalize: length mismatch");
  return (x_hat.array() * stats.scale.array()).matrix() + stats.mean;
}

void zero_background(Eigen::VectorXd& x_hat, const GraphConfig& cfg) {
  const int nd = cfg.node_dim();
  for (int i = 0; i < cfg.max_parts; ++i) {
    const int o = cfg.node_offset(i);
    if (x_hat[o + NodeChannels::kExists] <= 0.0) x_hat.segment(o + 1, nd - 1).setZero();
  }
  for (int k = 0; k < cfg.edge_count(); ++k) {
    const auto [i, j] = cfg.edge_endpoints(k);
    const int o = cfg.edge_offset(i, j);
    if (x_hat[o + EdgeChannels::kChirality] == 0.0) {
      x_hat.segment(o + 1, cfg.edge_dim() - 1).setZero();
    }
  }
}

Eigen::VectorXd encode_for_diffusion(const ArticulatedObject& obj, const GraphConfig& cfg,
                                     const NormalizationStats& stats) {
  Eigen::VectorXd x = normalize(flatten(encode_object(obj, cfg)), stats);
  zero_background(x, cfg);
  return x;
}

MaskKind parse_mask_kind(std::string_view name) {
  if (name == "parts" || name == "part2motion") return MaskKind::kParts;
  if (name == "motion" || name == "motion2part") return MaskKind::kMotion;
  if (name == "gapart" || name == "gapart2object") return MaskKind::kGAPart;
  if (name == "custom") return MaskKind::kCustom;
  throw std::invalid_argument("unknown condition kind '" + std::string(name) + "'");
}

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::kParts: return "parts";
    case MaskKind::kMotion: return "motion";
    case MaskKind::kGAPart: return "gapart";
    case MaskKind::kCustom: return "custom";
  }
  return "custom";
}

Eigen::VectorXd make_mask(const MaskSpec& spec, const GraphConfig& cfg, const ArticulationGraph* known) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(cfg.flat_dim());
  const int node_block = cfg.max_parts * cfg.node_dim();
  const NodeChannels nc(cfg);
  switch (spec.kind) {
    case MaskKind::kParts:
      m.head(node_block).setOnes();
      break;
    case MaskKind::kMotion:
      m.tail(cfg.flat_dim() - node_block).setOnes();
      for (int i = 0; i < cfg.max_parts; ++i) m[cfg.node_offset(i) + NodeChannels::kExists] = 1.0;
      break;
    case MaskKind::kGAPart: {
      if (known == nullptr) throw std::invalid_argument("gapart mask needs the known graph");
      if (!(known->config() == cfg)) throw std::invalid_argument("gapart mask: graph config mismatch");
      const int n0 = cfg.node_offset(0);
      m[n0 + NodeChannels::kExists] = 1.0;
      m.segment(n0 + nc.bbox, 3 + cfg.latent_dim).setOnes();
      m[cfg.node_offset(1) + NodeChannels::kExists] = 1.0;
      const int e = cfg.edge_offset(0, 1);
      m[e + EdgeChannels::kChirality] = 1.0;
      m.segment<3>(e + EdgeChannels::kDirection).setOnes();
      const EdgeAttr& edge = known->edge(0, 1);
      const double bounds[4] = {edge.prismatic.lo, edge.prismatic.hi, edge.revolute.lo,
                                edge.revolute.hi};
      for (int b = 0; b < 4; ++b) {
        if (bounds[b] == 0.0) m[e + EdgeChannels::kPrismatic + b] = 1.0;
      }
      break;
    }
    case MaskKind::kCustom:
      for (int idx : spec.indices) {
        if (idx < 0 || idx >= cfg.flat_dim()) {
          throw std::out_of_range("custom mask channel " + std::to_string(idx) + " out of range");
        }
        m[idx] = 1.0;
      }
      break;
  }
  return m;
}

}  // namespace artdiff
