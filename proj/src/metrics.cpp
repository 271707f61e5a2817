#include "artdiff/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "artdiff/hash.hpp"

namespace artdiff {

namespace {

constexpr int kLeafSize = 12;
constexpr std::uint64_t kStateTag = 0x51;
constexpr std::uint64_t kShuffleTag = 0x73;

bool same_pose(const RigidTransform& a, const RigidTransform& b) { return a.R == b.R && a.t == b.t; }

// Canonical argument order, so d~(a,b) and d~(b,a) run the same arithmetic.
bool ordered_before(const Instance& a, const Instance& b) {
  const auto ka = std::tie(a.key.object_id, a.key.state_index, a.key.seed);
  const auto kb = std::tie(b.key.object_id, b.key.state_index, b.key.seed);
  if (ka != kb) return ka < kb;
  const double* pa = a.points.data();
  const double* pb = b.points.data();
  return std::lexicographical_compare(pa, pa + a.points.size(), pb, pb + b.points.size());
}

struct Nearest {
  const Instance& target;
  NearestMethod method;
  double operator()(const Vec3& q, double cap) const {
    return method == NearestMethod::kKdTree ? target.tree.nearest_sq(q, cap)
                                            : brute_nearest_sq(target.points, q, cap);
  }
};

// chamfer(x, T y) with T mapping y's points into x's frame; returns `bound`
// as soon as the partial sum shows the result cannot be lower. Each query is
// capped at the squared distance that would already exceed the bound.
double chamfer_bounded(const Instance& x, const Instance& y, const RigidTransform& T, bool identity,
                       NearestMethod method, double bound) {
  const double nx = static_cast<double>(x.points.cols());
  const double ny = static_cast<double>(y.points.cols());
  const double inf = std::numeric_limits<double>::infinity();
  const RigidTransform Ti = T.inverse();
  const Nearest in_x{x, method};
  const Nearest in_y{y, method};
  double sx = 0.0;
  for (Eigen::Index c = 0; c < x.points.cols(); ++c) {
    const Vec3 p = x.points.col(c);
    const double cap = bound == inf ? inf : bound * nx - sx;
    const double d = in_y(identity ? p : Ti.apply(p), cap);
    if (d >= cap) return bound;
    sx += d;
    if (sx / nx >= bound) return bound;
  }
  const double head = sx / nx;
  double sy = 0.0;
  for (Eigen::Index c = 0; c < y.points.cols(); ++c) {
    const Vec3 p = y.points.col(c);
    const double cap = bound == inf ? inf : (bound - head) * ny - sy;
    const double d = in_x(identity ? p : T.apply(p), cap);
    if (d >= cap) return bound;
    sy += d;
    if (head + sy / ny >= bound) return bound;
  }
  return head + sy / ny;
}

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

KdTree::KdTree(const Eigen::Matrix3Xd& points) {
  if (points.cols() == 0) return;
  std::vector<int> idx(points.cols());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(2 * points.cols() / kLeafSize + 2);
  build(0, static_cast<int>(points.cols()), idx, points);
  points_.resize(3, points.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) points_.col(static_cast<Eigen::Index>(k)) = points.col(idx[k]);
}

int KdTree::build(int begin, int end, std::vector<int>& idx, const Eigen::Matrix3Xd& src) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (int k = begin; k < end; ++k) {
    lo = lo.cwiseMin(src.col(idx[k]));
    hi = hi.cwiseMax(src.col(idx[k]));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(idx.begin() + begin, idx.begin() + mid, idx.begin() + end,
                   [&](int a, int b) { return src(axis, a) < src(axis, b); });
  const double split = src(axis, idx[mid]);
  const int left = build(begin, mid, idx, src);
  const int right = build(mid, end, idx, src);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

void KdTree::search(int node, const Vec3& q, double& best) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (int k = n.begin; k < n.end; ++k) best = std::min(best, (points_.col(k) - q).squaredNorm());
    return;
  }
  const double diff = q[n.axis] - n.split;
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, q, best);
  if (diff * diff < best) search(far, q, best);
}

double KdTree::nearest_sq(const Vec3& q, double cap) const {
  if (nodes_.empty()) throw std::logic_error("nearest-neighbor query on an empty tree");
  double best = cap;
  search(0, q, best);
  return best;
}

double brute_nearest_sq(const Eigen::Matrix3Xd& P, const Vec3& q, double cap) {
  if (P.cols() == 0) throw std::invalid_argument("nearest-neighbor query on an empty set");
  double best = cap;
  for (Eigen::Index c = 0; c < P.cols(); ++c) best = std::min(best, (P.col(c) - q).squaredNorm());
  return best;
}

double chamfer(const Eigen::Matrix3Xd& P1, const Eigen::Matrix3Xd& P2, NearestMethod method) {
  if (P1.cols() == 0 || P2.cols() == 0) throw std::invalid_argument("chamfer distance needs nonempty point sets");
  Instance a, b;
  a.points = P1;
  b.points = P2;
  if (method == NearestMethod::kKdTree) {
    a.tree = KdTree(P1);
    b.tree = KdTree(P2);
  }
  return chamfer_bounded(a, b, RigidTransform::identity(), true, method,
                         std::numeric_limits<double>::infinity());
}

Instance make_instance(const ArticulatedObject& obj, const StateSet& states, int n_points, const SampleKey& key) {
  PosedInstance posed = instantiate(obj, states, n_points, key);
  if (posed.points.cols() == 0) throw std::invalid_argument("instance has no surface points");
  Instance inst;
  // Interleave parts so bounded comparisons see every part early.
  std::vector<Eigen::Index> order(posed.points.cols());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(combine_seeds({key.object_id, key.state_index, key.seed, kShuffleTag}));
  std::shuffle(order.begin(), order.end(), rng);
  inst.points.resize(3, posed.points.cols());
  for (std::size_t k = 0; k < order.size(); ++k) inst.points.col(static_cast<Eigen::Index>(k)) = posed.points.col(order[k]);
  inst.part_poses = std::move(posed.part_poses);
  inst.tree = KdTree(inst.points);
  inst.key = key;
  return inst;
}

double d_tilde(const Instance& a, const Instance& b, NearestMethod method, double bound) {
  const bool swap = ordered_before(b, a);
  const Instance& x = swap ? b : a;
  const Instance& y = swap ? a : b;

  struct Candidate {
    double heuristic;
    RigidTransform T;
    bool identity;
  };
  const Vec3 cx = x.points.rowwise().mean();
  const Vec3 cy = y.points.rowwise().mean();
  std::vector<Candidate> candidates;
  candidates.reserve(x.part_poses.size() * y.part_poses.size());
  for (const RigidTransform& Ti : x.part_poses) {
    for (const RigidTransform& Tj : y.part_poses) {
      const bool identity = same_pose(Ti, Tj);
      const RigidTransform T = identity ? RigidTransform::identity() : Ti * Tj.inverse();
      candidates.push_back({(T.apply(cy) - cx).squaredNorm(), T, identity});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& p, const Candidate& q) { return p.heuristic < q.heuristic; });
  double best = bound;
  for (const Candidate& c : candidates) best = std::min(best, chamfer_bounded(x, y, c.T, c.identity, method, best));
  return best;
}

ObjectSamples sample_object(const ArticulatedObject& obj, const MetricOptions& opt) {
  if (opt.states < 1) throw std::invalid_argument("instantiation distance needs M >= 1");
  const std::uint64_t id = object_fingerprint(obj);
  std::mt19937_64 rng(combine_seeds({id, opt.seed, kStateTag}));
  const auto states = sample_joint_states(obj, opt.states, rng);
  ObjectSamples out;
  for (int m = 0; m < opt.states; ++m) {
    out.instances.push_back(make_instance(obj, states[m], opt.n_points,
                                          {id, static_cast<std::uint64_t>(m), opt.seed}));
  }
  return out;
}

double instantiation_distance(const ObjectSamples& o1, const ObjectSamples& o2, NearestMethod method) {
  return instantiation_distance_bounded(o1, o2, std::numeric_limits<double>::infinity(), method);
}

double instantiation_distance_bounded(const ObjectSamples& o1, const ObjectSamples& o2, double bound,
                                      NearestMethod method) {
  const std::size_t m1 = o1.instances.size();
  const std::size_t m2 = o2.instances.size();
  if (m1 == 0 || m2 == 0) throw std::invalid_argument("instantiation distance needs sampled states");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> row_min(m1, inf), col_min(m2, inf);
  std::vector<char> done(m1 * m2, 0);
  const double entry_cap = bound * static_cast<double>(std::max(m1, m2));
  auto visit = [&](std::size_t a, std::size_t b) {
    if (done[a * m2 + b]) return;
    done[a * m2 + b] = 1;
    // Entries at or above both running minima cannot change either of them,
    // and a single minimum of `entry_cap` already pushes the total past `bound`.
    const double d = d_tilde(o1.instances[a], o2.instances[b], method,
                             std::min(std::max(row_min[a], col_min[b]), entry_cap));
    row_min[a] = std::min(row_min[a], d);
    col_min[b] = std::min(col_min[b], d);
  };
  // A first sweep gives every row and column a finite minimum so the full
  // sweep can prune.
  for (std::size_t k = 0; k < std::max(m1, m2); ++k) visit(k % m1, k % m2);
  double rows_done = 0.0;
  for (std::size_t a = 0; a < m1; ++a) {
    for (std::size_t b = 0; b < m2; ++b) visit(a, b);
    rows_done += row_min[a];
    if (rows_done / static_cast<double>(m1) >= bound) return bound;
  }
  const double rows = std::accumulate(row_min.begin(), row_min.end(), 0.0) / static_cast<double>(m1);
  const double cols = std::accumulate(col_min.begin(), col_min.end(), 0.0) / static_cast<double>(m2);
  return std::min(rows + cols, bound);
}

double instantiation_distance(const ArticulatedObject& o1, const ArticulatedObject& o2, const MetricOptions& opt) {
  return instantiation_distance(sample_object(o1, opt), sample_object(o2, opt), opt.method);
}

Eigen::MatrixXd distance_matrix(const std::vector<ObjectSamples>& a, const std::vector<ObjectSamples>& b,
                                const MetricOptions& opt) {
  Eigen::MatrixXd d(a.size(), b.size());
  const int cols = static_cast<int>(b.size());
  parallel_for(static_cast<int>(a.size() * b.size()), opt.threads, [&](int k) {
    d(k / cols, k % cols) = instantiation_distance(a[k / cols], b[k % cols], opt.method);
  });
  return d;
}

Eigen::MatrixXd distance_matrix(const std::vector<ObjectSamples>& a, const MetricOptions& opt) {
  const int n = static_cast<int>(a.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  parallel_for(static_cast<int>(pairs.size()), opt.threads, [&](int k) {
    const auto [i, j] = pairs[k];
    d(i, j) = d(j, i) = instantiation_distance(a[i], a[j], opt.method);
  });
  return d;
}

double mmd(const Eigen::MatrixXd& d_sr) {
  if (d_sr.rows() == 0 || d_sr.cols() == 0) throw std::invalid_argument("MMD needs nonempty sets");
  double total = 0.0;
  for (Eigen::Index r = 0; r < d_sr.cols(); ++r) total += d_sr.col(r).minCoeff();
  return total / static_cast<double>(d_sr.cols());
}

double cov(const Eigen::MatrixXd& d_sr) {
  if (d_sr.rows() == 0 || d_sr.cols() == 0) throw std::invalid_argument("COV needs nonempty sets");
  std::set<Eigen::Index> hit;
  for (Eigen::Index s = 0; s < d_sr.rows(); ++s) {
    Eigen::Index r = 0;
    d_sr.row(s).minCoeff(&r);
    hit.insert(r);
  }
  return static_cast<double>(hit.size()) / static_cast<double>(d_sr.cols());
}

double one_nna(const Eigen::MatrixXd& d_ss, const Eigen::MatrixXd& d_rr, const Eigen::MatrixXd& d_sr) {
  const Eigen::Index ns = d_sr.rows();
  const Eigen::Index nr = d_sr.cols();
  if (ns == 0 || nr == 0) throw std::invalid_argument("1-NNA needs nonempty sets");
  if (d_ss.rows() != ns || d_ss.cols() != ns || d_rr.rows() != nr || d_rr.cols() != nr) {
    throw std::invalid_argument("1-NNA matrix shapes do not match");
  }
  const double inf = std::numeric_limits<double>::infinity();
  auto own_min = [&](const Eigen::MatrixXd& d, Eigen::Index i) {
    double best = inf;
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (j != i) best = std::min(best, d(i, j));
    }
    return best;
  };
  int correct = 0;
  for (Eigen::Index s = 0; s < ns; ++s) {
    if (own_min(d_ss, s) < d_sr.row(s).minCoeff()) ++correct;
  }
  for (Eigen::Index r = 0; r < nr; ++r) {
    if (own_min(d_rr, r) < d_sr.col(r).minCoeff()) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ns + nr);
}

SetMetrics evaluate_sets(const std::vector<ArticulatedObject>& samples,
                         const std::vector<ArticulatedObject>& reference, const MetricOptions& opt) {
  if (samples.empty() || reference.empty()) throw std::invalid_argument("metric sets must be nonempty");
  std::vector<ObjectSamples> s, r;
  for (const auto& o : samples) s.push_back(sample_object(o, opt));
  for (const auto& o : reference) r.push_back(sample_object(o, opt));
  SetMetrics out;
  out.d_sr = distance_matrix(s, r, opt);
  out.mmd = mmd(out.d_sr);
  out.cov = cov(out.d_sr);
  out.one_nna = one_nna(distance_matrix(s, opt), distance_matrix(r, opt), out.d_sr);
  out.n_sample = static_cast<int>(samples.size());
  out.n_reference = static_cast<int>(reference.size());
  return out;
}

double range_iou(const Range& a, const Range& b) {
  const double inter = std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo));
  const double uni = std::max(a.hi, b.hi) - std::min(a.lo, b.lo);
  if (uni <= 0.0) return (a.lo == b.lo && a.hi == b.hi) ? 1.0 : 0.0;
  return inter / uni;
}

std::vector<JointRecovery> compare_joints(const ArticulatedObject& reference, const ArticulatedObject& generated,
                                          double max_angle_deg, double min_iou) {
  std::vector<JointRecovery> out;
  for (const Joint& ref : reference.joints) {
    JointRecovery rec;
    for (const Joint& gen : generated.joints) {
      const bool same = gen.parent == ref.parent && gen.child == ref.child;
      const bool flipped = gen.parent == ref.child && gen.child == ref.parent;
      if (!same && !flipped) continue;
      // Swapping parent and child reverses the axis and keeps the ranges.
      const Vec3 l = flipped ? Vec3(-gen.axis.l) : gen.axis.l;
      const double cosine = std::clamp(l.normalized().dot(ref.axis.l.normalized()), -1.0, 1.0);
      rec.found = true;
      rec.angle_deg = std::acos(cosine) * 180.0 / std::numbers::pi;
      rec.iou = 1.0;
      if (ref.prismatic.width() > 0.0) rec.iou = std::min(rec.iou, range_iou(ref.prismatic, gen.prismatic));
      if (ref.revolute.width() > 0.0) rec.iou = std::min(rec.iou, range_iou(ref.revolute, gen.revolute));
      rec.recovered = rec.angle_deg < max_angle_deg && rec.iou > min_iou;
      break;
    }
    out.push_back(rec);
  }
  return out;
}

}  // namespace artdiff
