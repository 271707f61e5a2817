#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "artdiff/artgraph.hpp"
#include "artdiff/checkpoint.hpp"
#include "artdiff/dataset.hpp"
#include "artdiff/diffusion.hpp"
#include "artdiff/hash.hpp"
#include "artdiff/mesh_io.hpp"
#include "artdiff/metrics.hpp"
#include "artdiff/postprocess.hpp"
#include "artdiff/training.hpp"
#include "artdiff/urdf.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace artdiff;

namespace {

constexpr std::uint64_t kSplitTag = 0x5350;
constexpr std::uint64_t kModelTag = 0x4d44;
constexpr std::uint64_t kSampleTag = 0x534d;

// Failure classes, each reported with its own prefix and exit code.
struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

enum ExitCode { kOk = 0, kFailure = 1, kMissingFile = 3, kSchema = 4, kDimension = 5, kBadConfig = 6 };

CliError missing_file(const fs::path& p) { return {kMissingFile, "missing file: " + p.string()}; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw missing_file(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::vector<ArticulatedObject> read_corpus(const fs::path& p) {
  const std::string text = read_file(p);
  try {
    return corpus_from_json(text);
  } catch (const std::exception& e) {
    throw CliError(kSchema, "schema violation in " + p.string() + ": " + e.what());
  }
}

Checkpoint read_checkpoint(const fs::path& p) {
  const std::string text = read_file(p);
  try {
    return checkpoint_from_json(text);
  } catch (const std::exception& e) {
    throw CliError(kSchema, "schema violation in " + p.string() + ": " + e.what());
  }
}

// Defaults for every configurable field; a config file may only set these keys.
json default_config() {
  const GraphConfig g;
  const DenoiserConfig d = DenoiserConfig::test_config(g);
  const TrainConfig t;
  const SynthSpec s;
  const MetricOptions m;
  return {
      {"graph", {{"max_parts", g.max_parts}, {"latent_dim", g.latent_dim}, {"include_rotation", g.include_rotation}}},
      {"model",
       {{"hidden", d.hidden},
        {"layers", d.layers},
        {"time_dim", d.time_dim},
        {"pos_dim", d.pos_dim},
        {"leaky_slope", d.leaky_slope},
        {"scale_attention", d.scale_attention},
        {"prediction", std::string(to_string(d.prediction))}}},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"epoch_repeat", t.epoch_repeat},
        {"lr", t.lr},
        {"weighted_loss", t.weighted_loss},
        {"checkpoint_interval", t.checkpoint_interval},
        {"grad_clip", t.grad_clip},
        {"schedule",
         {{"steps", t.schedule.steps}, {"beta_start", t.schedule.beta_start}, {"beta_end", t.schedule.beta_end}}}}},
      {"data",
       {{"family", "mixed"},
        {"n", 64},
        {"min_parts", s.min_parts},
        {"max_parts", s.max_parts},
        {"min_size", s.min_size},
        {"max_size", s.max_size},
        {"split", {0.7, 0.1, 0.2}}}},
      {"metrics", {{"states", m.states}, {"n_points", m.n_points}, {"threads", m.threads}, {"method", "kdtree"}}},
  };
}

void check_known_keys(const json& user, const json& defaults, const std::string& where) {
  if (!user.is_object()) throw CliError(kBadConfig, "config: " + where + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where + "/" + key;
    if (!defaults.contains(key)) throw CliError(kBadConfig, "config: unknown key " + path);
    const json& def = defaults.at(key);
    if (def.is_object()) {
      check_known_keys(value, def, path);
    } else if (def.is_number() != value.is_number() || def.is_boolean() != value.is_boolean() ||
               def.is_string() != value.is_string() || def.is_array() != value.is_array()) {
      throw CliError(kBadConfig, "config: wrong type for " + path);
    }
  }
}

// Merged configuration: defaults, then the config file, then explicit flags.
struct RunConfig {
  json values = default_config();
  std::uint64_t seed = 0;

  void load_file(const std::optional<std::string>& path) {
    if (!path) return;
    json user;
    try {
      user = json::parse(read_file(*path));
    } catch (const json::exception& e) {
      throw CliError(kSchema, "schema violation in " + *path + ": " + e.what());
    }
    if (user.contains("seed")) {
      if (!user["seed"].is_number_unsigned()) throw CliError(kBadConfig, "config: seed must be a nonnegative integer");
      seed = user["seed"].get<std::uint64_t>();
      user.erase("seed");
    }
    check_known_keys(user, values, "");
    values.merge_patch(user);
  }

  template <class T>
  void set(const char* pointer, const std::optional<T>& v) {
    if (v) values[json::json_pointer(pointer)] = *v;
  }

  GraphConfig graph() const {
    GraphConfig g;
    const json& j = values["graph"];
    g.max_parts = j["max_parts"];
    g.latent_dim = j["latent_dim"];
    g.include_rotation = j["include_rotation"];
    return g;
  }

  DenoiserConfig model(const GraphConfig& g) const {
    const json& j = values["model"];
    DenoiserConfig d = DenoiserConfig::for_graph(g, j["hidden"], j["layers"]);
    d.time_dim = j["time_dim"];
    d.pos_dim = j["pos_dim"];
    d.leaky_slope = j["leaky_slope"];
    d.scale_attention = j["scale_attention"];
    d.prediction = parse_prediction(j["prediction"].get<std::string>());
    d.seed = combine_seeds({seed, kModelTag});
    return d;
  }

  TrainConfig train() const {
    const json& j = values["train"];
    TrainConfig t;
    t.epochs = j["epochs"];
    t.batch_size = j["batch_size"];
    t.epoch_repeat = j["epoch_repeat"];
    t.lr = j["lr"];
    t.weighted_loss = j["weighted_loss"];
    t.checkpoint_interval = j["checkpoint_interval"];
    t.grad_clip = j["grad_clip"];
    t.schedule = {j["schedule"]["steps"], j["schedule"]["beta_start"], j["schedule"]["beta_end"]};
    t.seed = seed;
    return t;
  }

  SynthSpec synth() const {
    const json& j = values["data"];
    SynthSpec s;
    const std::string family = j["family"];
    if (family == "cabinet") {
      s.family = Family::kCabinetDrawers;
      s.cabinet_any = true;
    } else {
      s.family = parse_family(family);
    }
    s.min_parts = j["min_parts"];
    s.max_parts = j["max_parts"];
    s.min_size = j["min_size"];
    s.max_size = j["max_size"];
    s.latent_dim = values["graph"]["latent_dim"];
    s.seed = seed;
    return s;
  }

  int data_count() const { return values["data"]["n"]; }
  std::vector<double> split() const { return values["data"]["split"].get<std::vector<double>>(); }

  MetricOptions metrics() const {
    const json& j = values["metrics"];
    MetricOptions m;
    m.states = j["states"];
    m.n_points = j["n_points"];
    m.threads = j["threads"];
    const std::string method = j["method"];
    if (method == "kdtree") {
      m.method = NearestMethod::kKdTree;
    } else if (method == "brute") {
      m.method = NearestMethod::kBruteForce;
    } else {
      throw CliError(kBadConfig, "config: metrics/method must be kdtree or brute");
    }
    m.seed = seed;
    return m;
  }

  // Every section parses and passes its own checks before any work starts.
  void validate() const {
    try {
      const GraphConfig g = graph();
      g.validate();
      model(g).validate();
      train().validate();
      synth().validate();
      if (data_count() < 0) throw std::invalid_argument("data/n must be nonnegative");
      split_sizes(1, split());
      const MetricOptions m = metrics();
      if (m.states < 1 || m.n_points < 1 || m.threads < 1) {
        throw std::invalid_argument("metrics states, n_points and threads must be positive");
      }
    } catch (const CliError&) {
      throw;
    } catch (const std::exception& e) {
      throw CliError(kBadConfig, std::string("invalid config: ") + e.what());
    }
  }

  std::string hash() const {
    Fnv1a h;
    h.update(values.dump());
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h.digest();
    return ss.str();
  }
};

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg, const json& args,
                    const std::vector<std::string>& outputs) {
  json m = {{"command", command},
            {"seed", cfg.seed},
            {"config_hash", cfg.hash()},
            {"config", cfg.values},
            {"args", args},
            {"outputs", outputs}};
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

// A directory resolves to the first of the given names it contains.
fs::path resolve_corpus(const fs::path& p, std::initializer_list<const char*> names) {
  if (!fs::is_directory(p)) {
    if (!fs::exists(p)) throw missing_file(p);
    return p;
  }
  for (const char* n : names) {
    if (fs::exists(p / n)) return p / n;
  }
  throw missing_file(p / *names.begin());
}

ArticulatedObject read_object(const fs::path& p, int index) {
  if (p.extension() == ".urdf") {
    try {
      return parse_urdf(read_file(p));
    } catch (const CliError&) {
      throw;
    } catch (const std::exception& e) {
      throw CliError(kSchema, "schema violation in " + p.string() + ": " + e.what());
    }
  }
  const auto corpus = read_corpus(p);
  if (index < 0 || index >= static_cast<int>(corpus.size())) {
    throw CliError(kFailure, "object index " + std::to_string(index) + " out of range for " + p.string() + " (" +
                                 std::to_string(corpus.size()) + " objects)");
  }
  return corpus[index];
}

void check_fits(const std::vector<ArticulatedObject>& objects, const GraphConfig& g, const std::string& what) {
  for (std::size_t k = 0; k < objects.size(); ++k) {
    const auto& o = objects[k];
    if (static_cast<int>(o.parts.size()) > g.max_parts) {
      throw CliError(kDimension, "dimension mismatch: " + what + " object " + std::to_string(k) + " has " +
                                     std::to_string(o.parts.size()) + " parts, capacity is " +
                                     std::to_string(g.max_parts));
    }
    for (const auto& part : o.parts) {
      if (part.latent.size() != g.latent_dim) {
        throw CliError(kDimension, "dimension mismatch: " + what + " object " + std::to_string(k) +
                                       " has latent width " + std::to_string(part.latent.size()) + ", expected " +
                                       std::to_string(g.latent_dim));
      }
    }
  }
}

char name_buf[64];
std::string numbered(const char* stem, int i, const char* ext) {
  std::snprintf(name_buf, sizeof name_buf, "%s_%04d%s", stem, i, ext);
  return name_buf;
}

json report_json(const ExtractionReport& r) {
  json edges = json::array();
  for (auto [i, j] : r.tree_edges) edges.push_back({i, j});
  return {{"foreground", r.foreground},
          {"tree_edges", edges},
          {"orientation_conflicts", r.orientation_conflicts},
          {"repairs", r.repairs},
          {"top2_fallback", r.top2_fallback}};
}

// Extracts each row and writes URDF, rest-pose OBJ, a corpus file and a report.
std::vector<std::string> write_samples(const fs::path& out, const Eigen::MatrixXd& rows, const Checkpoint& ckpt,
                                       const PartLibrary* library, const ArticulatedObject* reference,
                                       json& report) {
  std::vector<ArticulatedObject> objects;
  std::vector<std::string> files;
  report["samples"] = json::array();
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Extraction ex = extract_object(rows.row(i).transpose(), ckpt.stats, ckpt.graph);
    json entry = report_json(ex.report);
    if (library != nullptr && !library->empty()) {
      json parts = json::array();
      for (const Part& p : ex.object.parts) {
        const int row = retrieve_nearest_part(part_feature(p), *library);
        parts.push_back({library->source[row].first, library->source[row].second});
      }
      entry["retrieved_parts"] = parts;
    }
    if (reference != nullptr) {
      json joints = json::array();
      for (const JointRecovery& jr : compare_joints(*reference, ex.object)) {
        joints.push_back(
            {{"found", jr.found}, {"angle_deg", jr.angle_deg}, {"range_iou", jr.iou}, {"recovered", jr.recovered}});
      }
      entry["joint_recovery"] = joints;
    }
    report["samples"].push_back(entry);

    const std::string urdf = numbered("sample", static_cast<int>(i), ".urdf");
    write_file(out / urdf, export_urdf(ex.object, numbered("sample", static_cast<int>(i), "")));
    const std::string obj = numbered("sample", static_cast<int>(i), ".obj");
    std::vector<JointState> rest(ex.object.joints.size());
    std::ostringstream mesh;
    write_obj(posed_box_mesh(ex.object, forward_kinematics(ex.object, rest)), mesh);
    write_file(out / obj, mesh.str());
    files.push_back(urdf);
    files.push_back(obj);
    objects.push_back(std::move(ex.object));
  }
  save_corpus(objects, out / "objects.json");
  write_file(out / "report.json", report.dump(2) + "\n");
  files.push_back("objects.json");
  files.push_back("report.json");
  return files;
}

void add_common(CLI::App* cmd, std::optional<std::string>& config, std::optional<std::uint64_t>& seed,
                std::string& out, bool out_required = true) {
  cmd->add_option("--config", config, "JSON config file (flags override its values)");
  cmd->add_option("--seed", seed, "seed for all randomness");
  auto* o = cmd->add_option("--out", out, "output directory");
  if (out_required) o->required();
}

RunConfig base_config(const std::optional<std::string>& config, const std::optional<std::uint64_t>& seed) {
  RunConfig cfg;
  cfg.load_file(config);
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Articulated object diffusion toolkit"};
  app.require_subcommand(1);

  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus split into train/val/test");
  add_common(gen, config, seed, out);
  std::optional<std::string> family;
  std::optional<int> n_objects, min_parts, max_parts;
  std::optional<std::vector<double>> split;
  gen->add_option("--family", family, "cabinet, cabinet-drawers, cabinet-doors, laptop, scissors or mixed");
  gen->add_option("-n,--count", n_objects, "number of objects");
  gen->add_option("--min-parts", min_parts, "fewest parts per object");
  gen->add_option("--max-parts", max_parts, "most parts per object");
  gen->add_option("--split", split, "train,val,test ratios")->delimiter(',')->expected(3);

  // train
  auto* tr = app.add_subcommand("train", "train a denoiser on a corpus directory");
  add_common(tr, config, seed, out);
  std::string data_dir;
  std::optional<std::string> resume;
  std::optional<int> epochs, batch_size, epoch_repeat, hidden, layers, ckpt_interval;
  std::optional<double> lr;
  tr->add_option("--data", data_dir, "directory with train.json and optionally val.json")->required();
  tr->add_option("--resume", resume, "checkpoint to continue from");
  tr->add_option("--epochs", epochs, "total epochs");
  tr->add_option("--batch-size", batch_size, "rows per step");
  tr->add_option("--epoch-repeat", epoch_repeat, "passes over the data per epoch");
  tr->add_option("--lr", lr, "Adam learning rate");
  tr->add_option("--hidden", hidden, "hidden width");
  tr->add_option("--layers", layers, "graph layers");
  tr->add_option("--checkpoint-interval", ckpt_interval, "epochs between checkpoint writes (0 = end only)");

  // sample
  auto* sa = app.add_subcommand("sample", "draw unconditional samples from a checkpoint");
  add_common(sa, config, seed, out);
  std::string checkpoint_path;
  int n_samples = 16;
  std::optional<std::string> library_path;
  sa->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  sa->add_option("--n", n_samples, "number of samples")->check(CLI::PositiveNumber);
  sa->add_option("--library", library_path, "corpus to retrieve nearest parts from");

  // condition
  auto* co = app.add_subcommand("condition", "conditional generation from a known object");
  add_common(co, config, seed, out);
  std::string mode, input_path;
  int index = 0;
  co->add_option("--mode", mode, "part2motion, motion2part or gapart2object")
      ->required()
      ->check(CLI::IsMember({"part2motion", "motion2part", "gapart2object"}));
  co->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  co->add_option("--input", input_path, "corpus JSON or URDF holding the known object")->required();
  co->add_option("--index", index, "object index inside a corpus file");
  co->add_option("--n", n_samples, "number of samples")->check(CLI::PositiveNumber);
  co->add_option("--library", library_path, "corpus to retrieve nearest parts from");

  // eval
  auto* ev = app.add_subcommand("eval", "set metrics between generated and reference objects");
  add_common(ev, config, seed, out);
  std::string samples_path, reference_path;
  std::optional<int> states, n_points, threads;
  bool write_matrix = false;
  ev->add_option("--samples", samples_path, "sample directory or corpus file")->required();
  ev->add_option("--reference", reference_path, "reference directory or corpus file")->required();
  ev->add_option("--states", states, "joint states per object");
  ev->add_option("--points", n_points, "surface points per state");
  ev->add_option("--threads", threads, "worker threads");
  ev->add_flag("--matrix", write_matrix, "also write the sample-by-reference distance matrix as CSV");

  // animate
  auto* an = app.add_subcommand("animate", "write an OBJ sequence sweeping every joint");
  add_common(an, config, seed, out);
  int frames = 10;
  an->add_option("--input", input_path, "corpus JSON or URDF")->required();
  an->add_option("--index", index, "object index inside a corpus file");
  an->add_option("--frames", frames, "number of frames")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const fs::path out_dir(out);
    RunConfig cfg = base_config(config, seed);

    if (*gen) {
      cfg.set("/data/family", family);
      cfg.set("/data/n", n_objects);
      cfg.set("/data/min_parts", min_parts);
      cfg.set("/data/max_parts", max_parts);
      cfg.set("/data/split", split);
      cfg.validate();
      const auto corpus = generate_synthetic(cfg.synth(), cfg.data_count());
      const Split s = split_corpus(corpus, cfg.split(), combine_seeds({cfg.seed, kSplitTag}));
      ensure_dir(out_dir);
      save_corpus(s.train, out_dir / "train.json");
      save_corpus(s.val, out_dir / "val.json");
      save_corpus(s.test, out_dir / "test.json");
      write_manifest(out_dir, "gen-data", cfg, json::object(), {"train.json", "val.json", "test.json"});
      std::cout << "wrote " << s.train.size() << "/" << s.val.size() << "/" << s.test.size()
                << " train/val/test objects to " << out_dir.string() << "\n";
    } else if (*tr) {
      cfg.set("/train/epochs", epochs);
      cfg.set("/train/batch_size", batch_size);
      cfg.set("/train/epoch_repeat", epoch_repeat);
      cfg.set("/train/lr", lr);
      cfg.set("/train/checkpoint_interval", ckpt_interval);
      cfg.set("/model/hidden", hidden);
      cfg.set("/model/layers", layers);
      cfg.validate();
      const fs::path data(data_dir);
      const auto train_set = read_corpus(resolve_corpus(data, {"train.json"}));
      if (train_set.empty()) throw CliError(kFailure, "training set is empty: " + data.string());
      std::vector<ArticulatedObject> val_set;
      if (fs::is_directory(data) && fs::exists(data / "val.json")) val_set = read_corpus(data / "val.json");

      Checkpoint ckpt;
      if (resume) {
        ckpt = read_checkpoint(*resume);
        ckpt.train.epochs = cfg.train().epochs;
      } else {
        ckpt.graph = cfg.graph();
        ckpt.denoiser = cfg.model(ckpt.graph);
        ckpt.train = cfg.train();
        check_fits(train_set, ckpt.graph, "training");
        ckpt.stats = stats_for(train_set, ckpt.graph);
        ckpt.state = TrainState::fresh(Denoiser(ckpt.denoiser, ckpt.schedule()).params());
      }
      check_fits(train_set, ckpt.graph, "training");
      check_fits(val_set, ckpt.graph, "validation");

      const Eigen::MatrixXd train_rows = encode_rows(train_set, ckpt.graph, ckpt.stats);
      const Eigen::MatrixXd val_rows =
          val_set.empty() ? Eigen::MatrixXd(0, ckpt.graph.flat_dim()) : encode_rows(val_set, ckpt.graph, ckpt.stats);

      ensure_dir(out_dir);
      std::ofstream log(out_dir / "train_log.csv");
      write_log_header(log);
      for (const auto& r : ckpt.state.history) write_log_row(log, r);
      TrainHooks hooks;
      hooks.on_epoch = [&](const EpochRecord& r) {
        write_log_row(log, r);
        log.flush();
      };
      hooks.on_checkpoint = [&](const TrainState& st) {
        Checkpoint snap = ckpt;
        snap.state = st;
        save_checkpoint(snap, out_dir / "checkpoint.json");
      };
      train(ckpt.state, ckpt.denoiser, train_rows, val_rows, ckpt.train, hooks);
      save_checkpoint(ckpt, out_dir / "checkpoint.json");
      write_manifest(out_dir, "train", cfg, {{"data", data_dir}, {"resume", resume.value_or("")}},
                     {"checkpoint.json", "train_log.csv"});
      std::cout << "trained " << ckpt.state.epoch << " epochs (" << ckpt.state.step << " steps)";
      if (!ckpt.state.history.empty()) std::cout << ", final loss " << ckpt.state.history.back().train_loss;
      std::cout << "\n";
    } else if (*sa || *co) {
      cfg.validate();
      const Checkpoint ckpt = read_checkpoint(checkpoint_path);
      const Denoiser model = ckpt.model();
      const NoiseSchedule sched = ckpt.schedule();
      std::optional<PartLibrary> library;
      if (library_path) library = build_part_library(read_corpus(resolve_corpus(*library_path, {"train.json"})));
      std::mt19937_64 rng(combine_seeds({cfg.seed, kSampleTag}));
      ensure_dir(out_dir);
      json report;
      json args = {{"checkpoint", checkpoint_path}, {"n", n_samples}, {"library", library_path.value_or("")}};
      std::vector<std::string> files;
      if (*sa) {
        const Eigen::MatrixXd rows = sample(model, sched, n_samples, ckpt.graph.flat_dim(), rng);
        report["mode"] = "unconditional";
        files = write_samples(out_dir, rows, ckpt, library ? &*library : nullptr, nullptr, report);
        write_manifest(out_dir, "sample", cfg, args, files);
      } else {
        const ArticulatedObject known = read_object(input_path, index);
        check_fits({known}, ckpt.graph, "input");
        const ArticulationGraph known_graph = encode_object(known, ckpt.graph);
        MaskSpec spec;
        spec.kind = mode == "part2motion" ? MaskKind::kParts
                    : mode == "motion2part" ? MaskKind::kMotion
                                            : MaskKind::kGAPart;
        if (spec.kind == MaskKind::kGAPart && known.parts.size() < 2) {
          throw CliError(kDimension, "dimension mismatch: gapart2object needs an input with at least 2 parts");
        }
        const Eigen::VectorXd mask = make_mask(spec, ckpt.graph, &known_graph);
        const Eigen::VectorXd x_known = encode_for_diffusion(known, ckpt.graph, ckpt.stats);
        const Eigen::MatrixXd rows = conditioned_sample(model, sched, x_known.transpose(), mask, n_samples, rng);
        report["mode"] = mode;
        files = write_samples(out_dir, rows, ckpt, library ? &*library : nullptr,
                              spec.kind == MaskKind::kMotion ? nullptr : &known, report);
        args["mode"] = mode;
        args["input"] = input_path;
        args["index"] = index;
        write_manifest(out_dir, "condition", cfg, args, files);
      }
      std::cout << "wrote " << n_samples << " samples to " << out_dir.string() << "\n";
    } else if (*ev) {
      cfg.set("/metrics/states", states);
      cfg.set("/metrics/n_points", n_points);
      cfg.set("/metrics/threads", threads);
      cfg.validate();
      const auto s = read_corpus(resolve_corpus(samples_path, {"objects.json", "test.json"}));
      const auto r = read_corpus(resolve_corpus(reference_path, {"test.json", "objects.json"}));
      if (s.empty() || r.empty()) throw CliError(kFailure, "eval needs nonempty sample and reference sets");
      const MetricOptions opt = cfg.metrics();
      const SetMetrics m = evaluate_sets(s, r, opt);
      ensure_dir(out_dir);
      json result = {{"mmd", m.mmd},
                     {"cov", m.cov},
                     {"one_nna", m.one_nna},
                     {"n_sample", m.n_sample},
                     {"n_reference", m.n_reference},
                     {"M", opt.states},
                     {"N", opt.n_points},
                     {"seed", cfg.seed}};
      write_file(out_dir / "metrics.json", result.dump(2) + "\n");
      std::vector<std::string> files = {"metrics.json"};
      if (write_matrix) {
        std::ostringstream csv;
        csv << std::setprecision(17);
        for (Eigen::Index i = 0; i < m.d_sr.rows(); ++i) {
          for (Eigen::Index j = 0; j < m.d_sr.cols(); ++j) csv << (j ? "," : "") << m.d_sr(i, j);
          csv << "\n";
        }
        write_file(out_dir / "distance_matrix.csv", csv.str());
        files.push_back("distance_matrix.csv");
      }
      write_manifest(out_dir, "eval", cfg, {{"samples", samples_path}, {"reference", reference_path}}, files);
      std::cout << result.dump() << "\n";
    } else if (*an) {
      cfg.validate();
      const ArticulatedObject obj = read_object(input_path, index);
      try {
        validate_tree(obj);
      } catch (const std::exception& e) {
        throw CliError(kSchema, "schema violation in " + input_path + ": " + e.what());
      }
      ensure_dir(out_dir);
      std::vector<std::string> files;
      for (const auto& p : write_animation(obj, frames, out_dir)) files.push_back(p.filename().string());
      write_manifest(out_dir, "animate", cfg, {{"input", input_path}, {"index", index}, {"frames", frames}}, files);
      std::cout << "wrote " << files.size() << " frames to " << out_dir.string() << "\n";
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
