#include "artdiff/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace artdiff {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json schedule_to_json(const ScheduleConfig& s) {
  return {{"steps", s.steps}, {"beta_start", s.beta_start}, {"beta_end", s.beta_end}};
}

ScheduleConfig schedule_from_json(const json& j) {
  return {j.at("steps").get<int>(), j.at("beta_start").get<double>(), j.at("beta_end").get<double>()};
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format"] = "artdiff-checkpoint";
  j["version"] = Checkpoint::kVersion;
  j["graph"] = {{"max_parts", c.graph.max_parts},
                {"latent_dim", c.graph.latent_dim},
                {"include_rotation", c.graph.include_rotation}};
  j["stats"] = {{"mean", vec_to_json(c.stats.mean)}, {"scale", vec_to_json(c.stats.scale)}};
  const DenoiserConfig& d = c.denoiser;
  j["denoiser"] = {{"max_parts", d.max_parts},   {"node_dim", d.node_dim},
                   {"edge_dim", d.edge_dim},     {"hidden", d.hidden},
                   {"layers", d.layers},         {"time_dim", d.time_dim},
                   {"pos_dim", d.pos_dim},       {"leaky_slope", d.leaky_slope},
                   {"scale_attention", d.scale_attention}, {"prediction", to_string(d.prediction)},
                   {"seed", d.seed}};
  const TrainConfig& t = c.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"epoch_repeat", t.epoch_repeat},
                {"lr", t.lr},
                {"seed", t.seed},
                {"weighted_loss", t.weighted_loss},
                {"schedule", schedule_to_json(t.schedule)},
                {"checkpoint_interval", t.checkpoint_interval},
                {"grad_clip", t.grad_clip},
                {"val_seed", t.val_seed}};
  const TrainState& s = c.state;
  json history = json::array();
  for (const EpochRecord& r : s.history) {
    history.push_back({{"step", r.step},
                       {"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"val_loss", r.val_loss ? json(*r.val_loss) : json(nullptr)}});
  }
  j["state"] = {{"params", vec_to_json(s.params)},
                {"adam_m", vec_to_json(s.adam.m)},
                {"adam_v", vec_to_json(s.adam.v)},
                {"adam_step", s.adam.step},
                {"step", s.step},
                {"epoch", s.epoch},
                {"best_params", vec_to_json(s.best_params)},
                {"best_val", s.best_val},
                {"has_best", s.has_best},
                {"history", history}};
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != "artdiff-checkpoint") {
      throw std::runtime_error("not an artdiff checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != Checkpoint::kVersion) {
      throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    const json& g = j.at("graph");
    c.graph.max_parts = g.at("max_parts").get<int>();
    c.graph.latent_dim = g.at("latent_dim").get<int>();
    c.graph.include_rotation = g.at("include_rotation").get<bool>();
    c.stats.mean = vec_from_json(j.at("stats").at("mean"));
    c.stats.scale = vec_from_json(j.at("stats").at("scale"));
    const json& d = j.at("denoiser");
    c.denoiser.max_parts = d.at("max_parts").get<int>();
    c.denoiser.node_dim = d.at("node_dim").get<int>();
    c.denoiser.edge_dim = d.at("edge_dim").get<int>();
    c.denoiser.hidden = d.at("hidden").get<int>();
    c.denoiser.layers = d.at("layers").get<int>();
    c.denoiser.time_dim = d.at("time_dim").get<int>();
    c.denoiser.pos_dim = d.at("pos_dim").get<int>();
    c.denoiser.leaky_slope = d.at("leaky_slope").get<double>();
    c.denoiser.scale_attention = d.at("scale_attention").get<bool>();
    c.denoiser.prediction = parse_prediction(d.at("prediction").get<std::string>());
    c.denoiser.seed = d.at("seed").get<std::uint64_t>();
    const json& t = j.at("train");
    c.train.epochs = t.at("epochs").get<int>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.epoch_repeat = t.at("epoch_repeat").get<int>();
    c.train.lr = t.at("lr").get<double>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.train.weighted_loss = t.at("weighted_loss").get<bool>();
    c.train.schedule = schedule_from_json(t.at("schedule"));
    c.train.checkpoint_interval = t.at("checkpoint_interval").get<int>();
    c.train.grad_clip = t.at("grad_clip").get<double>();
    c.train.val_seed = t.at("val_seed").get<std::uint64_t>();
    const json& s = j.at("state");
    c.state.params = vec_from_json(s.at("params"));
    c.state.adam.m = vec_from_json(s.at("adam_m"));
    c.state.adam.v = vec_from_json(s.at("adam_v"));
    c.state.adam.step = s.at("adam_step").get<long>();
    c.state.step = s.at("step").get<long>();
    c.state.epoch = s.at("epoch").get<int>();
    c.state.best_params = vec_from_json(s.at("best_params"));
    c.state.best_val = s.at("best_val").get<double>();
    c.state.has_best = s.at("has_best").get<bool>();
    for (const json& r : s.at("history")) {
      EpochRecord rec;
      rec.step = r.at("step").get<long>();
      rec.epoch = r.at("epoch").get<int>();
      rec.train_loss = r.at("train_loss").get<double>();
      if (!r.at("val_loss").is_null()) rec.val_loss = r.at("val_loss").get<double>();
      c.state.history.push_back(rec);
    }
    c.graph.validate();
    c.denoiser.validate();
    if (c.denoiser.flat_dim() != c.graph.flat_dim() || c.stats.mean.size() != c.graph.flat_dim() ||
        c.stats.scale.size() != c.graph.flat_dim()) {
      throw std::runtime_error("checkpoint dimensions are inconsistent");
    }
    if (static_cast<std::size_t>(c.model_params().size()) != DenoiserLayout::build(c.denoiser).size) {
      throw std::runtime_error("checkpoint parameter count does not match its denoiser config");
    }
    return c;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace artdiff
