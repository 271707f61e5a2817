#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "artdiff/artgraph.hpp"
#include "artdiff/diffusion.hpp"

namespace artdiff {

/// What the linear output heads estimate. Clean-sample heads are mapped to a
/// noise estimate through eps = (x_t - sqrt(abar_t) x0_hat) / sqrt(1 - abar_t).
enum class Prediction { kNoise, kCleanSample };

std::string_view to_string(Prediction p);
Prediction parse_prediction(std::string_view name);

struct DenoiserConfig {
  int max_parts = 8;  // K
  int node_dim = 15;  // D_v
  int edge_dim = GraphConfig::kEdgeDim;
  int hidden = 128;
  int layers = 4;
  int time_dim = 32;
  int pos_dim = 16;
  double leaky_slope = 0.1;
  bool scale_attention = false;  // divide scores by sqrt(hidden)
  Prediction prediction = Prediction::kCleanSample;
  std::uint64_t seed = 0;

  static DenoiserConfig for_graph(const GraphConfig& g, int hidden, int layers);
  /// L=2, H=32; the small configuration used by tests and the overfit run.
  static DenoiserConfig test_config(const GraphConfig& g) { return for_graph(g, 32, 2); }

  int edge_count() const { return max_parts * (max_parts - 1) / 2; }
  int flat_dim() const { return max_parts * node_dim + edge_count() * edge_dim; }
  int node_feature_dim() const { return hidden + pos_dim + time_dim; }
  int edge_feature_dim() const { return hidden + time_dim; }
  void validate() const;
  bool operator==(const DenoiserConfig&) const = default;
};

/// Location of one affine map inside the flat parameter vector: an in x out
/// column-major weight followed by an out-long bias (when present).
struct DenseSlot {
  std::size_t offset = 0;
  int in = 0;
  int out = 0;
  bool has_bias = true;
  std::size_t weight_size() const { return static_cast<std::size_t>(in) * out; }
  std::size_t size() const { return weight_size() + (has_bias ? out : 0); }
};

/// in -> H -> H -> out with leaky-ReLU after the two hidden maps. The key
/// MLP drops its last bias: a shared shift of every key cancels in the softmax.
struct MlpSlots {
  DenseSlot l0, l1, l2;
};

struct GraphLayerSlots {
  MlpSlots edge_mlp;
  MlpSlots query;
  MlpSlots key;
  DenseSlot fuse;  // [aggregated, pooled] -> hidden
};

struct DenoiserLayout {
  MlpSlots node_in;
  MlpSlots edge_in;
  std::vector<GraphLayerSlots> layers;
  DenseSlot node_out;
  DenseSlot edge_out;
  std::size_t size = 0;

  static DenoiserLayout build(const DenoiserConfig& cfg);
  std::vector<DenseSlot> dense_slots() const;
};

/// Sinusoidal code of an integer position, width entries.
Eigen::RowVectorXd sinusoidal_encoding(double position, int width);

/// Fan-in scaled uniform weights (std 1/sqrt(fan_in)), zero biases.
Eigen::VectorXd init_params(const DenoiserConfig& cfg, std::mt19937_64& rng);

struct MlpCache {
  Eigen::MatrixXd x, z0, a0, z1, a1;
};

struct GraphLayerCache {
  Eigen::MatrixXd node_in;    // B*K x node_feature_dim
  Eigen::MatrixXd edge_in;    // B*E x edge_feature_dim
  Eigen::MatrixXd edge_mlp_in;
  MlpCache edge_mlp, query, key;
  Eigen::MatrixXd edge_update;  // g'
  Eigen::MatrixXd q, k;
  Eigen::MatrixXd attention;    // B*K x K, zero on the diagonal
  Eigen::MatrixXd aggregated;   // B*K x H
  Eigen::MatrixXd pooled;       // B x H
  std::vector<int> pooled_argmax;  // B*H, node index per channel
  Eigen::MatrixXd fuse_in;
  Eigen::MatrixXd node_update;  // fused output added to the residual stream
};

struct ForwardCache {
  int batch = 0;
  Eigen::MatrixXd nodes;  // B*K x D_v raw attributes
  Eigen::MatrixXd edges;  // B*E x D_e
  Eigen::MatrixXd node_pe, node_te, edge_te;
  MlpCache node_in, edge_in;
  std::vector<Eigen::MatrixXd> h;  // L+1 node streams
  std::vector<Eigen::MatrixXd> g;  // L+1 edge streams
  std::vector<GraphLayerCache> layers;
  Eigen::MatrixXd node_out_in, edge_out_in;
  Eigen::VectorXd head_gain;  // d eps_hat / d head output, per row
};

/// Graph-attention noise predictor. One parameter vector serves every step t;
/// the schedule is only read by clean-sample heads.
class Denoiser final : public NoisePredictor {
 public:
  Denoiser(const DenoiserConfig& cfg, const NoiseSchedule& schedule);
  Denoiser(const DenoiserConfig& cfg, Eigen::VectorXd params, const NoiseSchedule& schedule);

  const DenoiserConfig& config() const { return cfg_; }
  const DenoiserLayout& layout() const { return layout_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x_t, std::span<const int> t) const override;

  /// Throws std::domain_error when parameters are not finite and
  /// std::out_of_range for a step outside the schedule.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x_t, std::span<const int> t,
                          ForwardCache* cache = nullptr) const;

  /// Gradient of sum(d_eps .* eps_hat) with respect to every parameter.
  Eigen::VectorXd backward(const ForwardCache& cache, const Eigen::MatrixXd& d_eps) const;

  struct InputFeatures {
    Eigen::MatrixXd nodes;  // B*K x (H + P + T): head(v) | PE(i) | TE(t)
    Eigen::MatrixXd edges;  // B*E x (H + T): head(e) | TE(t)
  };
  InputFeatures encode_inputs(const Eigen::MatrixXd& x_t, std::span<const int> t) const;

  /// Runs one graph layer on already-assembled features (rows grouped per sample).
  GraphLayerCache graph_layer(int layer, const Eigen::MatrixXd& node_features,
                              const Eigen::MatrixXd& edge_features, int batch) const;

 private:
  void forward_layer(const GraphLayerSlots& slots, GraphLayerCache& c, int batch) const;
  void backward_layer(const GraphLayerSlots& slots, const GraphLayerCache& c, int batch,
                      const Eigen::MatrixXd& d_node_update, const Eigen::MatrixXd& d_edge_update,
                      Eigen::MatrixXd& d_node_in, Eigen::MatrixXd& d_edge_in,
                      Eigen::VectorXd& grad) const;

  DenoiserConfig cfg_;
  std::vector<double> alpha_bar_;
  DenoiserLayout layout_;
  Eigen::VectorXd params_;
  std::vector<std::pair<int, int>> endpoints_;  // per stored edge
  std::vector<int> edge_of_pair_;               // K*K -> stored edge index, -1 on diagonal
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

/// Bias-corrected Adam update in place.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               const AdamOptions& opt);

}  // namespace artdiff
