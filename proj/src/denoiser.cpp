#include "artdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace artdiff {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using ConstMatMap = Eigen::Map<const MatrixXd>;
using MatMap = Eigen::Map<MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using VecMap = Eigen::Map<VectorXd>;

ConstMatMap weight(const VectorXd& p, const DenseSlot& s) {
  return ConstMatMap(p.data() + s.offset, s.in, s.out);
}
ConstVecMap bias(const VectorXd& p, const DenseSlot& s) {
  return ConstVecMap(p.data() + s.offset + s.weight_size(), s.out);
}
MatMap weight(VectorXd& p, const DenseSlot& s) { return MatMap(p.data() + s.offset, s.in, s.out); }
VecMap bias(VectorXd& p, const DenseSlot& s) {
  return VecMap(p.data() + s.offset + s.weight_size(), s.out);
}

MatrixXd dense(const VectorXd& p, const DenseSlot& s, const MatrixXd& x) {
  MatrixXd y(x.rows(), s.out);
  y.noalias() = x * weight(p, s);
  if (s.has_bias) y.rowwise() += bias(p, s).transpose();
  return y;
}

// Accumulates parameter gradients and returns dL/dx.
MatrixXd dense_backward(const VectorXd& p, const DenseSlot& s, const MatrixXd& x,
                        const MatrixXd& dy, VectorXd& grad, bool need_dx = true) {
  weight(grad, s).noalias() += x.transpose() * dy;
  if (s.has_bias) bias(grad, s) += dy.colwise().sum().transpose();
  if (!need_dx) return {};
  MatrixXd dx(dy.rows(), s.in);
  dx.noalias() = dy * weight(p, s).transpose();
  return dx;
}

MatrixXd leaky(const MatrixXd& z, double slope) {
  return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

MatrixXd leaky_grad(const MatrixXd& z, const MatrixXd& da, double slope) {
  return da.binaryExpr(z, [slope](double g, double v) { return v > 0.0 ? g : slope * g; });
}

MatrixXd mlp(const VectorXd& p, const MlpSlots& s, const MatrixXd& x, double slope, MlpCache* c) {
  MatrixXd z0 = dense(p, s.l0, x);
  MatrixXd a0 = leaky(z0, slope);
  MatrixXd z1 = dense(p, s.l1, a0);
  MatrixXd a1 = leaky(z1, slope);
  MatrixXd y = dense(p, s.l2, a1);
  if (c) {
    c->x = x;
    c->z0 = std::move(z0);
    c->a0 = std::move(a0);
    c->z1 = std::move(z1);
    c->a1 = std::move(a1);
  }
  return y;
}

MatrixXd mlp_backward(const VectorXd& p, const MlpSlots& s, const MlpCache& c, const MatrixXd& dy,
                      double slope, VectorXd& grad, bool need_dx = true) {
  MatrixXd da1 = dense_backward(p, s.l2, c.a1, dy, grad);
  MatrixXd dz1 = leaky_grad(c.z1, da1, slope);
  MatrixXd da0 = dense_backward(p, s.l1, c.a0, dz1, grad);
  MatrixXd dz0 = leaky_grad(c.z0, da0, slope);
  return dense_backward(p, s.l0, c.x, dz0, grad, need_dx);
}

DenseSlot take(std::size_t& cursor, int in, int out, bool has_bias = true) {
  DenseSlot s{cursor, in, out, has_bias};
  cursor += s.size();
  return s;
}

MlpSlots take_mlp(std::size_t& cursor, int in, int hidden, int out, bool last_bias = true) {
  MlpSlots m;
  m.l0 = take(cursor, in, hidden);
  m.l1 = take(cursor, hidden, hidden);
  m.l2 = take(cursor, hidden, out, last_bias);
  return m;
}

}  // namespace

std::string_view to_string(Prediction p) {
  return p == Prediction::kNoise ? "noise" : "clean_sample";
}

Prediction parse_prediction(std::string_view name) {
  if (name == "noise") return Prediction::kNoise;
  if (name == "clean_sample") return Prediction::kCleanSample;
  throw std::invalid_argument("unknown prediction '" + std::string(name) + "' (expected noise or clean_sample)");
}

DenoiserConfig DenoiserConfig::for_graph(const GraphConfig& g, int hidden, int layers) {
  DenoiserConfig c;
  c.max_parts = g.max_parts;
  c.node_dim = g.node_dim();
  c.edge_dim = g.edge_dim();
  c.hidden = hidden;
  c.layers = layers;
  return c;
}

void DenoiserConfig::validate() const {
  if (max_parts < 2) throw std::invalid_argument("denoiser needs K >= 2");
  if (node_dim <= 0 || edge_dim <= 0 || hidden <= 0 || time_dim <= 0 || pos_dim <= 0) {
    throw std::invalid_argument("denoiser widths must be positive");
  }
  if (layers < 0) throw std::invalid_argument("denoiser layer count must be non-negative");
}

DenoiserLayout DenoiserLayout::build(const DenoiserConfig& cfg) {
  cfg.validate();
  const int H = cfg.hidden;
  const int node_w = cfg.node_feature_dim();
  const int edge_w = cfg.edge_feature_dim();
  DenoiserLayout l;
  std::size_t cursor = 0;
  l.node_in = take_mlp(cursor, cfg.node_dim, H, H);
  l.edge_in = take_mlp(cursor, cfg.edge_dim, H, H);
  for (int k = 0; k < cfg.layers; ++k) {
    GraphLayerSlots s;
    s.edge_mlp = take_mlp(cursor, 2 * node_w + edge_w, H, H);
    s.query = take_mlp(cursor, node_w, H, H);
    s.key = take_mlp(cursor, node_w, H, H, false);
    s.fuse = take(cursor, 2 * H, H);
    l.layers.push_back(s);
  }
  const int streams = (cfg.layers + 1) * H;
  l.node_out = take(cursor, cfg.node_dim + streams + cfg.pos_dim + cfg.time_dim, cfg.node_dim);
  l.edge_out = take(cursor, cfg.edge_dim + streams + cfg.time_dim, cfg.edge_dim);
  l.size = cursor;
  return l;
}

std::vector<DenseSlot> DenoiserLayout::dense_slots() const {
  std::vector<DenseSlot> out;
  auto add = [&](const MlpSlots& m) {
    out.push_back(m.l0);
    out.push_back(m.l1);
    out.push_back(m.l2);
  };
  add(node_in);
  add(edge_in);
  for (const auto& l : layers) {
    add(l.edge_mlp);
    add(l.query);
    add(l.key);
    out.push_back(l.fuse);
  }
  out.push_back(node_out);
  out.push_back(edge_out);
  return out;
}

Eigen::RowVectorXd sinusoidal_encoding(double position, int width) {
  Eigen::RowVectorXd e(width);
  for (int c = 0; c < width; ++c) {
    const int pair = c / 2;
    const double freq = std::pow(10000.0, -2.0 * pair / width);
    e[c] = (c % 2 == 0) ? std::sin(position * freq) : std::cos(position * freq);
  }
  return e;
}

Eigen::VectorXd init_params(const DenoiserConfig& cfg, std::mt19937_64& rng) {
  const DenoiserLayout layout = DenoiserLayout::build(cfg);
  VectorXd p = VectorXd::Zero(static_cast<Index>(layout.size));
  for (const DenseSlot& s : layout.dense_slots()) {
    const double a = std::sqrt(3.0 / s.in);
    std::uniform_real_distribution<double> u(-a, a);
    auto w = weight(p, s);
    for (Index c = 0; c < w.cols(); ++c) {
      for (Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
    }
  }
  return p;
}

Denoiser::Denoiser(const DenoiserConfig& cfg, const NoiseSchedule& schedule)
    : Denoiser(cfg, [&] {
        std::mt19937_64 rng(cfg.seed);
        return init_params(cfg, rng);
      }(), schedule) {}

Denoiser::Denoiser(const DenoiserConfig& cfg, Eigen::VectorXd params, const NoiseSchedule& schedule)
    : cfg_(cfg), alpha_bar_(schedule.alpha_bar), layout_(DenoiserLayout::build(cfg)), params_(std::move(params)) {
  if (schedule.T < 1 || alpha_bar_.size() != static_cast<std::size_t>(schedule.T) + 1) {
    throw std::invalid_argument("denoiser needs a built noise schedule");
  }
  if (static_cast<std::size_t>(params_.size()) != layout_.size) {
    throw std::invalid_argument("parameter vector has " + std::to_string(params_.size()) +
                                " entries, layout needs " + std::to_string(layout_.size));
  }
  const int K = cfg_.max_parts;
  edge_of_pair_.assign(K * K, -1);
  for (int i = 0; i < K; ++i) {
    for (int j = i + 1; j < K; ++j) {
      edge_of_pair_[i * K + j] = edge_of_pair_[j * K + i] = static_cast<int>(endpoints_.size());
      endpoints_.emplace_back(i, j);
    }
  }
}

Eigen::MatrixXd Denoiser::predict(const Eigen::MatrixXd& x_t, std::span<const int> t) const {
  return forward(x_t, t, nullptr);
}

Denoiser::InputFeatures Denoiser::encode_inputs(const Eigen::MatrixXd& x_t, std::span<const int> t) const {
  ForwardCache c;
  (void)forward(x_t, t, &c);
  InputFeatures f;
  if (cfg_.layers > 0) {
    f.nodes = c.layers[0].node_in;
    f.edges = c.layers[0].edge_in;
  } else {
    f.nodes.resize(c.h[0].rows(), cfg_.node_feature_dim());
    f.nodes << c.h[0], c.node_pe, c.node_te;
    f.edges.resize(c.g[0].rows(), cfg_.edge_feature_dim());
    f.edges << c.g[0], c.edge_te;
  }
  return f;
}

GraphLayerCache Denoiser::graph_layer(int layer, const Eigen::MatrixXd& node_features,
                                      const Eigen::MatrixXd& edge_features, int batch) const {
  GraphLayerCache c;
  c.node_in = node_features;
  c.edge_in = edge_features;
  forward_layer(layout_.layers.at(layer), c, batch);
  return c;
}

void Denoiser::forward_layer(const GraphLayerSlots& s, GraphLayerCache& c, int batch) const {
  const int K = cfg_.max_parts;
  const int E = cfg_.edge_count();
  const int H = cfg_.hidden;
  const int node_w = cfg_.node_feature_dim();
  const int edge_w = cfg_.edge_feature_dim();
  const double slope = cfg_.leaky_slope;

  // Edge update: MLP(f_i, f_j, g_ij) with i < j.
  c.edge_mlp_in.resize(static_cast<Index>(batch) * E, 2 * node_w + edge_w);
  for (int b = 0; b < batch; ++b) {
    for (int e = 0; e < E; ++e) {
      const Index r = static_cast<Index>(b) * E + e;
      const auto [i, j] = endpoints_[e];
      c.edge_mlp_in.row(r).segment(0, node_w) = c.node_in.row(b * K + i);
      c.edge_mlp_in.row(r).segment(node_w, node_w) = c.node_in.row(b * K + j);
      c.edge_mlp_in.row(r).segment(2 * node_w, edge_w) = c.edge_in.row(r);
    }
  }
  c.edge_update = mlp(params_, s.edge_mlp, c.edge_mlp_in, slope, &c.edge_mlp);

  // Attention over the other K-1 nodes.
  c.q = mlp(params_, s.query, c.node_in, slope, &c.query);
  c.k = mlp(params_, s.key, c.node_in, slope, &c.key);
  const double score_scale = cfg_.scale_attention ? 1.0 / std::sqrt(static_cast<double>(H)) : 1.0;
  c.attention = MatrixXd::Zero(static_cast<Index>(batch) * K, K);
  c.aggregated = MatrixXd::Zero(static_cast<Index>(batch) * K, H);
  for (int b = 0; b < batch; ++b) {
    const auto qb = c.q.middleRows(b * K, K);
    const auto kb = c.k.middleRows(b * K, K);
    const MatrixXd scores = score_scale * (qb * kb.transpose());
    for (int i = 0; i < K; ++i) {
      double peak = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < K; ++j) {
        if (j != i) peak = std::max(peak, scores(i, j));
      }
      double norm = 0.0;
      for (int j = 0; j < K; ++j) {
        if (j == i) continue;
        const double w = std::exp(scores(i, j) - peak);
        c.attention(b * K + i, j) = w;
        norm += w;
      }
      for (int j = 0; j < K; ++j) {
        if (j == i) continue;
        const double a = c.attention(b * K + i, j) / norm;
        c.attention(b * K + i, j) = a;
        c.aggregated.row(b * K + i) += a * c.edge_update.row(b * E + edge_of_pair_[i * K + j]);
      }
    }
  }

  // Channel-wise max pooling, then a linear fuse of [aggregated, pooled].
  c.pooled.resize(batch, H);
  c.pooled_argmax.assign(static_cast<std::size_t>(batch) * H, 0);
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < H; ++ch) {
      int best = 0;
      for (int i = 1; i < K; ++i) {
        if (c.aggregated(b * K + i, ch) > c.aggregated(b * K + best, ch)) best = i;
      }
      c.pooled_argmax[static_cast<std::size_t>(b) * H + ch] = best;
      c.pooled(b, ch) = c.aggregated(b * K + best, ch);
    }
  }
  c.fuse_in.resize(static_cast<Index>(batch) * K, 2 * H);
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < K; ++i) {
      c.fuse_in.row(b * K + i) << c.aggregated.row(b * K + i), c.pooled.row(b);
    }
  }
  c.node_update = dense(params_, s.fuse, c.fuse_in);
}

Eigen::MatrixXd Denoiser::forward(const Eigen::MatrixXd& x_t, std::span<const int> t,
                                  ForwardCache* cache_out) const {
  if (!params_.allFinite()) throw std::domain_error("denoiser parameters contain NaN or Inf");
  if (x_t.cols() != cfg_.flat_dim()) {
    throw std::invalid_argument("denoiser input has " + std::to_string(x_t.cols()) +
                                " channels, expected " + std::to_string(cfg_.flat_dim()));
  }
  if (static_cast<Index>(t.size()) != x_t.rows()) {
    throw std::invalid_argument("denoiser needs one time step per row");
  }
  const int T = static_cast<int>(alpha_bar_.size()) - 1;
  for (const int step : t) {
    if (step < 1 || step > T) {
      throw std::out_of_range("denoiser step " + std::to_string(step) + " outside [1, " + std::to_string(T) + "]");
    }
  }
  const int B = static_cast<int>(x_t.rows());
  const int K = cfg_.max_parts;
  const int E = cfg_.edge_count();
  const int Dv = cfg_.node_dim;
  const int De = cfg_.edge_dim;
  const int H = cfg_.hidden;
  const int P = cfg_.pos_dim;
  const int Tw = cfg_.time_dim;
  const int L = cfg_.layers;
  const double slope = cfg_.leaky_slope;

  ForwardCache local;
  ForwardCache& c = cache_out ? *cache_out : local;
  c = ForwardCache{};
  c.batch = B;
  c.nodes.resize(static_cast<Index>(B) * K, Dv);
  c.edges.resize(static_cast<Index>(B) * E, De);
  c.node_pe.resize(static_cast<Index>(B) * K, P);
  c.node_te.resize(static_cast<Index>(B) * K, Tw);
  c.edge_te.resize(static_cast<Index>(B) * E, Tw);
  std::vector<Eigen::RowVectorXd> pe(K);
  for (int i = 0; i < K; ++i) pe[i] = sinusoidal_encoding(i, P);
  for (int b = 0; b < B; ++b) {
    const Eigen::RowVectorXd te = sinusoidal_encoding(t[b], Tw);
    for (int i = 0; i < K; ++i) {
      c.nodes.row(b * K + i) = x_t.row(b).segment(i * Dv, Dv);
      c.node_pe.row(b * K + i) = pe[i];
      c.node_te.row(b * K + i) = te;
    }
    for (int e = 0; e < E; ++e) {
      c.edges.row(b * E + e) = x_t.row(b).segment(K * Dv + e * De, De);
      c.edge_te.row(b * E + e) = te;
    }
  }

  c.h.push_back(mlp(params_, layout_.node_in, c.nodes, slope, &c.node_in));
  c.g.push_back(mlp(params_, layout_.edge_in, c.edges, slope, &c.edge_in));
  c.layers.resize(L);
  for (int l = 0; l < L; ++l) {
    GraphLayerCache& lc = c.layers[l];
    lc.node_in.resize(static_cast<Index>(B) * K, cfg_.node_feature_dim());
    lc.node_in << c.h[l], c.node_pe, c.node_te;
    lc.edge_in.resize(static_cast<Index>(B) * E, cfg_.edge_feature_dim());
    lc.edge_in << c.g[l], c.edge_te;
    forward_layer(layout_.layers[l], lc, B);
    c.h.push_back(c.h[l] + lc.node_update);
    c.g.push_back(c.g[l] + lc.edge_update);
  }

  c.node_out_in.resize(static_cast<Index>(B) * K, layout_.node_out.in);
  c.node_out_in.leftCols(Dv) = c.nodes;
  for (int l = 0; l <= L; ++l) c.node_out_in.middleCols(Dv + l * H, H) = c.h[l];
  c.node_out_in.middleCols(Dv + (L + 1) * H, P) = c.node_pe;
  c.node_out_in.rightCols(Tw) = c.node_te;
  c.edge_out_in.resize(static_cast<Index>(B) * E, layout_.edge_out.in);
  c.edge_out_in.leftCols(De) = c.edges;
  for (int l = 0; l <= L; ++l) c.edge_out_in.middleCols(De + l * H, H) = c.g[l];
  c.edge_out_in.rightCols(Tw) = c.edge_te;

  const MatrixXd node_eps = dense(params_, layout_.node_out, c.node_out_in);
  const MatrixXd edge_eps = dense(params_, layout_.edge_out, c.edge_out_in);
  MatrixXd out(B, cfg_.flat_dim());
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < K; ++i) out.row(b).segment(i * Dv, Dv) = node_eps.row(b * K + i);
    for (int e = 0; e < E; ++e) out.row(b).segment(K * Dv + e * De, De) = edge_eps.row(b * E + e);
  }
  c.head_gain = VectorXd::Ones(B);
  if (cfg_.prediction == Prediction::kCleanSample) {
    for (int b = 0; b < B; ++b) {
      const double ab = alpha_bar_[t[b]];
      const double inv_sd = 1.0 / std::sqrt(1.0 - ab);
      c.head_gain[b] = -std::sqrt(ab) * inv_sd;
      out.row(b) = inv_sd * x_t.row(b) + c.head_gain[b] * out.row(b);
    }
  }
  return out;
}

void Denoiser::backward_layer(const GraphLayerSlots& s, const GraphLayerCache& c, int batch,
                              const Eigen::MatrixXd& d_node_update,
                              const Eigen::MatrixXd& d_edge_update_in, Eigen::MatrixXd& d_node_in,
                              Eigen::MatrixXd& d_edge_in, Eigen::VectorXd& grad) const {
  const int K = cfg_.max_parts;
  const int E = cfg_.edge_count();
  const int H = cfg_.hidden;
  const int node_w = cfg_.node_feature_dim();
  const int edge_w = cfg_.edge_feature_dim();
  const double slope = cfg_.leaky_slope;
  const double score_scale = cfg_.scale_attention ? 1.0 / std::sqrt(static_cast<double>(H)) : 1.0;

  const MatrixXd d_fuse_in = dense_backward(params_, s.fuse, c.fuse_in, d_node_update, grad);
  MatrixXd d_agg = d_fuse_in.leftCols(H);
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < H; ++ch) {
      double d_pool = 0.0;
      for (int i = 0; i < K; ++i) d_pool += d_fuse_in(b * K + i, H + ch);
      d_agg(b * K + c.pooled_argmax[static_cast<std::size_t>(b) * H + ch], ch) += d_pool;
    }
  }

  MatrixXd d_edge_update = d_edge_update_in;
  MatrixXd d_q = MatrixXd::Zero(c.q.rows(), c.q.cols());
  MatrixXd d_k = MatrixXd::Zero(c.k.rows(), c.k.cols());
  Eigen::VectorXd d_a(K);
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < K; ++i) {
      const Index ri = static_cast<Index>(b) * K + i;
      double weighted = 0.0;
      for (int j = 0; j < K; ++j) {
        if (j == i) {
          d_a[j] = 0.0;
          continue;
        }
        const Index re = static_cast<Index>(b) * E + edge_of_pair_[i * K + j];
        const double a = c.attention(ri, j);
        d_edge_update.row(re) += a * d_agg.row(ri);
        d_a[j] = d_agg.row(ri).dot(c.edge_update.row(re));
        weighted += a * d_a[j];
      }
      for (int j = 0; j < K; ++j) {
        if (j == i) continue;
        const double d_score = c.attention(ri, j) * (d_a[j] - weighted) * score_scale;
        d_q.row(ri) += d_score * c.k.row(b * K + j);
        d_k.row(b * K + j) += d_score * c.q.row(ri);
      }
    }
  }

  d_node_in = mlp_backward(params_, s.query, c.query, d_q, slope, grad);
  d_node_in += mlp_backward(params_, s.key, c.key, d_k, slope, grad);
  const MatrixXd d_mlp_in = mlp_backward(params_, s.edge_mlp, c.edge_mlp, d_edge_update, slope, grad);
  d_edge_in = d_mlp_in.rightCols(edge_w);
  for (int b = 0; b < batch; ++b) {
    for (int e = 0; e < E; ++e) {
      const Index r = static_cast<Index>(b) * E + e;
      const auto [i, j] = endpoints_[e];
      d_node_in.row(b * K + i) += d_mlp_in.row(r).segment(0, node_w);
      d_node_in.row(b * K + j) += d_mlp_in.row(r).segment(node_w, node_w);
    }
  }
}

Eigen::VectorXd Denoiser::backward(const ForwardCache& c, const Eigen::MatrixXd& d_eps) const {
  const int B = c.batch;
  const int K = cfg_.max_parts;
  const int E = cfg_.edge_count();
  const int Dv = cfg_.node_dim;
  const int De = cfg_.edge_dim;
  const int H = cfg_.hidden;
  const int L = cfg_.layers;
  const double slope = cfg_.leaky_slope;
  if (d_eps.rows() != B || d_eps.cols() != cfg_.flat_dim()) {
    throw std::invalid_argument("backward: gradient shape does not match the cached batch");
  }

  VectorXd grad = VectorXd::Zero(params_.size());
  MatrixXd d_node_eps(static_cast<Index>(B) * K, Dv);
  MatrixXd d_edge_eps(static_cast<Index>(B) * E, De);
  for (int b = 0; b < B; ++b) {
    const double gain = c.head_gain[b];
    for (int i = 0; i < K; ++i) d_node_eps.row(b * K + i) = gain * d_eps.row(b).segment(i * Dv, Dv);
    for (int e = 0; e < E; ++e) d_edge_eps.row(b * E + e) = gain * d_eps.row(b).segment(K * Dv + e * De, De);
  }
  const MatrixXd d_node_out_in = dense_backward(params_, layout_.node_out, c.node_out_in, d_node_eps, grad);
  const MatrixXd d_edge_out_in = dense_backward(params_, layout_.edge_out, c.edge_out_in, d_edge_eps, grad);

  std::vector<MatrixXd> dh(L + 1), dg(L + 1);
  for (int l = 0; l <= L; ++l) {
    dh[l] = d_node_out_in.middleCols(Dv + l * H, H);
    dg[l] = d_edge_out_in.middleCols(De + l * H, H);
  }
  for (int l = L - 1; l >= 0; --l) {
    MatrixXd d_node_in, d_edge_in;
    backward_layer(layout_.layers[l], c.layers[l], B, dh[l + 1], dg[l + 1], d_node_in, d_edge_in, grad);
    dh[l] += dh[l + 1] + d_node_in.leftCols(H);
    dg[l] += dg[l + 1] + d_edge_in.leftCols(H);
  }
  (void)mlp_backward(params_, layout_.node_in, c.node_in, dh[0], slope, grad, false);
  (void)mlp_backward(params_, layout_.edge_in, c.edge_in, dg[0], slope, grad, false);
  return grad;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               const AdamOptions& opt) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam_step: size mismatch");
  if (state.m.size() != params.size()) {
    state.m = VectorXd::Zero(params.size());
    state.v = VectorXd::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = opt.beta1 * state.m + (1.0 - opt.beta1) * grads;
  state.v = opt.beta2 * state.v + (1.0 - opt.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  params.array() -= opt.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + opt.eps);
}

}  // namespace artdiff
