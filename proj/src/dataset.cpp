#include "artdiff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "artdiff/hash.hpp"

namespace artdiff {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;

struct Draw {
  std::mt19937_64 rng;
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
};

Part box(const Vec3& center, const Vec3& size) {
  Part p;
  p.translation = center;
  p.bbox = size;
  return p;
}

Joint hinge(int parent, int child, const Vec3& point, const Vec3& dir, Range revolute) {
  Joint j;
  j.parent = parent;
  j.child = child;
  j.axis = PluckerAxis::through(point, dir);
  j.revolute = revolute;
  return j;
}

Joint slider(int parent, int child, const Vec3& point, const Vec3& dir, Range prismatic) {
  Joint j;
  j.parent = parent;
  j.child = child;
  j.axis = PluckerAxis::through(point, dir);
  j.prismatic = prismatic;
  return j;
}

// z is up, the cabinet front faces +y.
ArticulatedObject cabinet_drawers(const SynthSpec& spec, Draw& d, double s) {
  const double W = s * d.uniform(0.6, 1.2);
  const double D = s * d.uniform(0.4, 0.8);
  const double H = s * d.uniform(0.6, 1.6);
  const int lo = std::max(1, spec.min_parts - 1);
  const int hi = std::max(lo, std::min(4, spec.max_parts - 1));
  const int k = d.integer(lo, hi);
  ArticulatedObject obj;
  obj.parts.push_back(box(Vec3::Zero(), {W, D, H}));
  const double slot = H / k;
  const double travel = d.uniform(0.5, 0.8) * D;
  for (int i = 0; i < k; ++i) {
    const Vec3 c(0.0, 0.05 * D, -0.5 * H + (i + 0.5) * slot);
    obj.parts.push_back(box(c, {0.9 * W, 0.9 * D, 0.85 * slot}));
    obj.joints.push_back(slider(0, i + 1, c, Vec3::UnitY(), {0.0, travel}));
  }
  return obj;
}

ArticulatedObject cabinet_doors(const SynthSpec& spec, Draw& d, double s) {
  const double W = s * d.uniform(0.6, 1.2);
  const double D = s * d.uniform(0.4, 0.8);
  const double H = s * d.uniform(0.8, 1.6);
  const double t = 0.04 * s;
  const int lo = std::max(1, spec.min_parts - 1);
  const int hi = std::max(lo, std::min(2, spec.max_parts - 1));
  const int doors = d.integer(lo, hi);
  const double open = d.uniform(0.5 * kPi, 0.75 * kPi);
  ArticulatedObject obj;
  obj.parts.push_back(box(Vec3::Zero(), {W, D, H}));
  const double door_w = W / doors;
  for (int i = 0; i < doors; ++i) {
    const double x0 = -0.5 * W + i * door_w;
    obj.parts.push_back(box({x0 + 0.5 * door_w, 0.5 * D + 0.5 * t, 0.0}, {door_w, t, H}));
    // Hinge on the door's inner vertical edge at the outer side of the cabinet.
    const bool left = (i == 0);
    const double hinge_x = left ? x0 : x0 + door_w;
    const Range r = left ? Range{0.0, open} : Range{-open, 0.0};
    obj.joints.push_back(hinge(0, i + 1, {hinge_x, 0.5 * D, 0.0}, Vec3::UnitZ(), r));
  }
  return obj;
}

ArticulatedObject laptop(Draw& d, double s) {
  const double W = s * d.uniform(0.8, 1.2);
  const double D = s * d.uniform(0.5, 0.8);
  const double t = s * d.uniform(0.03, 0.06);
  const double L = D * d.uniform(0.9, 1.1);
  ArticulatedObject obj;
  obj.parts.push_back(box({0.0, 0.0, 0.5 * t}, {W, D, t}));
  obj.parts.push_back(box({0.0, -0.5 * D + 0.5 * t, t + 0.5 * L}, {W, t, L}));
  const double back = d.uniform(0.2, 0.6);
  obj.joints.push_back(hinge(0, 1, {0.0, -0.5 * D, t}, Vec3::UnitX(), {-0.5 * kPi, back}));
  return obj;
}

ArticulatedObject scissors(Draw& d, double s) {
  const double L = s * d.uniform(0.8, 1.2);
  const double w = L * d.uniform(0.08, 0.15);
  const double t = L * d.uniform(0.02, 0.04);
  const double offset = L * d.uniform(0.15, 0.3);
  ArticulatedObject obj;
  obj.parts.push_back(box({offset, 0.0, 0.5 * t}, {L, w, t}));
  obj.parts.push_back(box({-offset, 0.0, 1.5 * t}, {L, w, t}));
  obj.joints.push_back(hinge(0, 1, Vec3::Zero(), Vec3::UnitZ(), {0.0, d.uniform(0.4, 0.9)}));
  return obj;
}

// Line number of every element of the top-level JSON array.
std::vector<int> record_lines(const std::string& text) {
  std::vector<int> lines;
  int line = 1, depth = 0;
  bool in_string = false, escape = false;
  for (char ch : text) {
    if (ch == '\n') ++line;
    if (in_string) {
      if (escape) escape = false;
      else if (ch == '\\') escape = true;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') in_string = true;
    else if (ch == '{' || ch == '[') {
      if (depth == 1 && ch == '{') lines.push_back(line);
      ++depth;
    } else if (ch == '}' || ch == ']') {
      --depth;
    }
  }
  return lines;
}

Vec3 vec3_field(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw std::runtime_error(where + ": '" + key + "' must hold 3 numbers");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

Range range_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return {};
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw std::runtime_error(where + ": '" + key + "' must hold [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ArticulatedObject object_from_json(const json& rec, const std::string& where) {
  ArticulatedObject obj;
  if (!rec.is_object()) throw std::runtime_error(where + ": record must be an object");
  for (std::size_t p = 0; p < rec.at("parts").size(); ++p) {
    const json& jp = rec.at("parts")[p];
    const std::string pw = where + ", part " + std::to_string(p);
    Part part;
    const auto pose = jp.at("pose").get<std::vector<double>>();
    if (pose.size() != 3 && pose.size() != 6) throw std::runtime_error(pw + ": 'pose' must hold 3 or 6 numbers");
    part.translation = {pose[0], pose[1], pose[2]};
    if (pose.size() == 6) part.rotation = {pose[3], pose[4], pose[5]};
    part.bbox = vec3_field(jp, "bbox", pw);
    if (jp.contains("latent")) {
      const auto lat = jp.at("latent").get<std::vector<double>>();
      part.latent = Eigen::Map<const Eigen::VectorXd>(lat.data(), static_cast<Eigen::Index>(lat.size()));
    }
    obj.parts.push_back(part);
  }
  const int n = static_cast<int>(obj.parts.size());
  if (n == 0) throw std::runtime_error(where + ": object has no parts");
  std::vector<bool> is_child(n, false);
  const json joints = rec.value("joints", json::array());
  for (std::size_t k = 0; k < joints.size(); ++k) {
    const json& jj = joints[k];
    const std::string jw = where + ", joint " + std::to_string(k);
    Joint j;
    j.parent = jj.at("parent").get<int>();
    j.child = jj.at("child").get<int>();
    if (j.parent < 0 || j.parent >= n) throw std::runtime_error(jw + ": parent " + std::to_string(j.parent) + " is not a part");
    if (j.child < 0 || j.child >= n) throw std::runtime_error(jw + ": child " + std::to_string(j.child) + " is not a part");
    Vec6 axis;
    axis << vec3_field(jj, "axis_l", jw), vec3_field(jj, "axis_m", jw);
    try {
      j.axis = project_to_plucker(axis);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(jw + ": " + e.what());
    }
    j.prismatic = range_field(jj, "range_prismatic", jw);
    j.revolute = range_field(jj, "range_revolute", jw);
    if (j.prismatic.lo > j.prismatic.hi || j.revolute.lo > j.revolute.hi) {
      throw std::runtime_error(jw + ": range lower bound exceeds upper bound");
    }
    // Keep the stored values bit-exact when they already are Plücker.
    if ((j.axis.as_vector() - axis).cwiseAbs().maxCoeff() < 1e-9) {
      j.axis.l = axis.head<3>();
      j.axis.m = axis.tail<3>();
    }
    is_child[j.child] = true;
    obj.joints.push_back(j);
  }
  const auto root = std::find(is_child.begin(), is_child.end(), false);
  if (root == is_child.end()) throw std::runtime_error(where + ": kinematic loop (every part has a parent)");
  obj.root = static_cast<int>(root - is_child.begin());
  try {
    validate_tree(obj);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
  return obj;
}

}  // namespace

Family parse_family(std::string_view name) {
  if (name == "cabinet-drawers" || name == "drawers") return Family::kCabinetDrawers;
  if (name == "cabinet-doors" || name == "doors") return Family::kCabinetDoors;
  if (name == "laptop") return Family::kLaptop;
  if (name == "scissors" || name == "scissors-like") return Family::kScissors;
  if (name == "mixed") return Family::kMixed;
  throw std::invalid_argument("unknown object family '" + std::string(name) + "'");
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kCabinetDrawers: return "cabinet-drawers";
    case Family::kCabinetDoors: return "cabinet-doors";
    case Family::kLaptop: return "laptop";
    case Family::kScissors: return "scissors";
    case Family::kMixed: return "mixed";
  }
  return "mixed";
}

void SynthSpec::validate() const {
  if (min_parts < 2 || max_parts < min_parts) throw std::invalid_argument("part-count range must satisfy 2 <= min <= max");
  if (!(min_size > 0.0 && max_size >= min_size)) throw std::invalid_argument("size range must be positive and ordered");
  if (latent_dim < 0) throw std::invalid_argument("latent width must be non-negative");
}

Eigen::VectorXd shape_signature(const Vec3& b, int width) {
  const double n = b.norm();
  const double base[8] = {b.x() / n,
                          b.y() / n,
                          b.z() / n,
                          std::log(b.x() / b.y()),
                          std::log(b.y() / b.z()),
                          std::log(b.x() / b.z()),
                          std::log(b.prod()) / 3.0,
                          n};
  Eigen::VectorXd out = Eigen::VectorXd::Zero(width);
  for (int k = 0; k < std::min(width, 8); ++k) out[k] = base[k];
  return out;
}

ArticulatedObject generate_one(const SynthSpec& spec, std::uint64_t index) {
  spec.validate();
  Draw d{std::mt19937_64(combine_seeds({spec.seed, index}))};
  Family f = spec.family;
  if (f == Family::kMixed) {
    f = static_cast<Family>(d.integer(0, 3));
  } else if (spec.cabinet_any) {
    f = d.integer(0, 1) == 0 ? Family::kCabinetDrawers : Family::kCabinetDoors;
  }
  const double s = d.uniform(spec.min_size, spec.max_size);
  ArticulatedObject obj;
  switch (f) {
    case Family::kCabinetDrawers: obj = cabinet_drawers(spec, d, s); break;
    case Family::kCabinetDoors: obj = cabinet_doors(spec, d, s); break;
    case Family::kLaptop: obj = laptop(d, s); break;
    case Family::kScissors: obj = scissors(d, s); break;
    case Family::kMixed: break;
  }
  normalize_object_frame(obj);
  for (Part& p : obj.parts) p.latent = shape_signature(p.bbox, spec.latent_dim);
  validate_tree(obj);
  return obj;
}

std::vector<ArticulatedObject> generate_synthetic(const SynthSpec& spec, int n) {
  std::vector<ArticulatedObject> out;
  out.reserve(std::max(n, 0));
  for (int k = 0; k < n; ++k) out.push_back(generate_one(spec, static_cast<std::uint64_t>(k)));
  return out;
}

std::vector<int> split_sizes(int n, const std::vector<double>& ratios) {
  if (ratios.empty()) throw std::invalid_argument("split needs at least one ratio");
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw std::invalid_argument("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  std::vector<int> sizes(ratios.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    const double exact = n * ratios[k];
    // Snap values within rounding noise of an integer.
    const double rounded = std::round(exact);
    const double v = std::abs(exact - rounded) < 1e-9 ? rounded : exact;
    sizes[k] = static_cast<int>(std::floor(v));
    assigned += sizes[k];
    rem.emplace_back(v - sizes[k], k);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[rem[k % rem.size()].second];
  return sizes;
}

Split split_corpus(const std::vector<ArticulatedObject>& corpus, const std::vector<double>& ratios,
                   std::uint64_t seed) {
  if (ratios.size() != 3) throw std::invalid_argument("split needs train/val/test ratios");
  const auto sizes = split_sizes(static_cast<int>(corpus.size()), ratios);
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Split s;
  std::size_t k = 0;
  for (int i = 0; i < sizes[0]; ++i) s.train.push_back(corpus[order[k++]]);
  for (int i = 0; i < sizes[1]; ++i) s.val.push_back(corpus[order[k++]]);
  for (int i = 0; i < sizes[2]; ++i) s.test.push_back(corpus[order[k++]]);
  return s;
}

std::string corpus_to_json(const std::vector<ArticulatedObject>& corpus) {
  json out = json::array();
  for (const ArticulatedObject& obj : corpus) {
    json parts = json::array();
    for (const Part& p : obj.parts) {
      std::vector<double> pose{p.translation.x(), p.translation.y(), p.translation.z()};
      if (!p.rotation.isZero(0.0)) pose.insert(pose.end(), {p.rotation.x(), p.rotation.y(), p.rotation.z()});
      parts.push_back({{"pose", pose},
                       {"bbox", {p.bbox.x(), p.bbox.y(), p.bbox.z()}},
                       {"latent", vec_json(p.latent)}});
    }
    json joints = json::array();
    for (const Joint& j : obj.joints) {
      joints.push_back({{"parent", j.parent},
                        {"child", j.child},
                        {"axis_l", {j.axis.l.x(), j.axis.l.y(), j.axis.l.z()}},
                        {"axis_m", {j.axis.m.x(), j.axis.m.y(), j.axis.m.z()}},
                        {"range_prismatic", {j.prismatic.lo, j.prismatic.hi}},
                        {"range_revolute", {j.revolute.lo, j.revolute.hi}}});
    }
    out.push_back({{"parts", parts}, {"joints", joints}});
  }
  return out.dump(1);
}

std::vector<ArticulatedObject> corpus_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("corpus JSON: ") + e.what());
  }
  if (!root.is_array()) throw std::runtime_error("corpus JSON: top level must be an array of objects");
  const auto lines = record_lines(text);
  std::vector<ArticulatedObject> out;
  for (std::size_t r = 0; r < root.size(); ++r) {
    std::string where = "record " + std::to_string(r);
    if (r < lines.size()) where += " (line " + std::to_string(lines[r]) + ")";
    try {
      out.push_back(object_from_json(root[r], where));
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": schema violation: " + e.what());
    }
  }
  return out;
}

void save_corpus(const std::vector<ArticulatedObject>& corpus, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus " + path.string());
  out << corpus_to_json(corpus) << '\n';
}

std::vector<ArticulatedObject> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return corpus_from_json(buf.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

Eigen::MatrixXd encode_rows(const std::vector<ArticulatedObject>& objects, const GraphConfig& cfg,
                            const NormalizationStats& stats) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(objects.size()), cfg.flat_dim());
  for (std::size_t k = 0; k < objects.size(); ++k) {
    rows.row(static_cast<Eigen::Index>(k)) = encode_for_diffusion(objects[k], cfg, stats).transpose();
  }
  return rows;
}

NormalizationStats stats_for(const std::vector<ArticulatedObject>& train, const GraphConfig& cfg) {
  std::vector<Eigen::VectorXd> flat;
  for (const auto& o : train) flat.push_back(flatten(encode_object(o, cfg)));
  return compute_stats(flat, cfg);
}

}  // namespace artdiff
