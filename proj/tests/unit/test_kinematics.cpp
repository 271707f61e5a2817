#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "artdiff/kinematics.hpp"
#include "test_util.hpp"

namespace artdiff {
namespace {

using test::random_unit;

// Rodrigues written out from the cross-product matrix, independent of Eigen::AngleAxis.
Mat3 rodrigues(const Vec3& l, double theta) {
  Mat3 K;
  K << 0, -l.z(), l.y(), l.z(), 0, -l.x(), -l.y(), l.x(), 0;
  return Mat3::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * K * K;
}

// Rotate about the line through `p` with direction `l`, then slide by d along it.
Vec3 screw_about_point(const Vec3& x, const Vec3& p, const Vec3& l, double theta, double d) {
  return p + rodrigues(l, theta) * (x - p) + d * l;
}

double line_distance(const PluckerAxis& a, const Vec3& q) { return (q.cross(a.l) - a.m).norm(); }

TEST(PluckerProjection, AlreadyPerpendicular) {
  Vec6 v;
  v << 0, 0, 2, 1, 0, 0;
  const PluckerAxis a = project_to_plucker(v);
  EXPECT_EQ(a.l, Vec3(0, 0, 1));
  EXPECT_EQ(a.m, Vec3(1, 0, 0));
}

TEST(PluckerProjection, RemovesParallelMomentum) {
  Vec6 v;
  v << 0, 0, 1, 1, 0, 1;
  const PluckerAxis a = project_to_plucker(v);
  EXPECT_EQ(a.l, Vec3(0, 0, 1));
  EXPECT_EQ(a.m, Vec3(1, 0, 0));
}

TEST(PluckerProjection, DegenerateDirectionThrows) {
  Vec6 v = Vec6::Zero();
  v[3] = 1.0;
  EXPECT_THROW(
      {
        try {
          project_to_plucker(v);
        } catch (const std::invalid_argument& e) {
          EXPECT_STREQ(e.what(), "degenerate joint axis");
          throw;
        }
      },
      std::invalid_argument);
}

TEST(PluckerProjection, IdempotentAndValid) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = n(rng);
    const PluckerAxis a = project_to_plucker(v);
    EXPECT_NEAR(a.l.norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(a.l.dot(a.m)), 1e-12);
    const PluckerAxis b = project_to_plucker(a.as_vector());
    EXPECT_LT((b.as_vector() - a.as_vector()).norm(), 1e-12);
  }
}

TEST(AxisToParentFrame, IdentityPoseKeepsAxis) {
  const PluckerAxis a = PluckerAxis::through(Vec3(0.3, -1, 2), Vec3(1, 2, 3));
  const PluckerAxis b = axis_to_parent_frame(a, RigidTransform::identity());
  EXPECT_LT((a.as_vector() - b.as_vector()).norm(), 1e-15);
}

TEST(AxisToParentFrame, PureTranslation) {
  const PluckerAxis a{Vec3(0, 0, 1), Vec3::Zero()};
  const PluckerAxis b = axis_to_parent_frame(a, RigidTransform::translation(Vec3(1, 0, 0)));
  // The line x=y=0 seen from a frame at (1,0,0) passes through (-1,0,0).
  const Vec3 p0(-1, 0, 0), p1(-1, 0, 1);
  EXPECT_LT((b.l - (p1 - p0)).norm(), 1e-15);
  EXPECT_LT((b.m - p0.cross(b.l)).norm(), 1e-15);
  EXPECT_LT((b.m - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(AxisToParentFrame, PointTransportOnRandomPoses) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const PluckerAxis g = PluckerAxis::through(p, random_unit(rng));
    const RigidTransform pose =
        RigidTransform::from_axis_angle(random_unit(rng) * u(rng), Vec3(u(rng), u(rng), u(rng)));
    const PluckerAxis local = axis_to_parent_frame(g, pose);
    const RigidTransform inv = pose.inverse();
    for (double s : {-1.5, 0.0, 2.0}) {
      const Vec3 q = inv.apply(p + s * g.l);
      EXPECT_LT(line_distance(local, q), 1e-9);
    }
    // Mapping back with the pose recovers the global axis.
    const PluckerAxis back = axis_to_parent_frame(local, inv);
    EXPECT_LT((back.as_vector() - g.as_vector()).norm(), 1e-9);
  }
}

TEST(ScrewTransform, ZeroStateIsIdentity) {
  const PluckerAxis a = PluckerAxis::through(Vec3(1, 2, 3), Vec3(0, 1, 1));
  const RigidTransform T = screw_transform(a, {});
  EXPECT_LT((T.R - Mat3::Identity()).norm(), 1e-15);
  EXPECT_LT(T.t.norm(), 1e-15);
}

TEST(ScrewTransform, PurePrismatic) {
  const RigidTransform T = screw_transform({Vec3(0, 0, 1), Vec3::Zero()}, {0.0, 0.5});
  EXPECT_LT((T.R - Mat3::Identity()).norm(), 1e-15);
  EXPECT_LT((T.t - Vec3(0, 0, 0.5)).norm(), 1e-15);
}

TEST(ScrewTransform, HalfTurnAboutOffsetLine) {
  const PluckerAxis a{Vec3(0, 0, 1), Vec3(0, -1, 0)};
  ASSERT_LT((a.foot() - Vec3(1, 0, 0)).norm(), 1e-15);
  const RigidTransform T = screw_transform(a, {std::numbers::pi, 0.0});
  EXPECT_LT((T.R - Vec3(-1, -1, 1).asDiagonal().toDenseMatrix()).norm(), 1e-12);
  EXPECT_LT((T.t - Vec3(2, 0, 0)).norm(), 1e-12);
  const Vec3 oracle = screw_about_point(Vec3::Zero(), Vec3(1, 0, 0), a.l, std::numbers::pi, 0.0);
  EXPECT_LT((T.apply(Vec3::Zero()) - oracle).norm(), 1e-12);
}

TEST(ScrewTransform, MatchesPointRotationOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const Vec3 l = random_unit(rng);
    const double theta = u(rng) * 2.0, d = u(rng);
    const RigidTransform T = screw_transform(PluckerAxis::through(p, l), {theta, d});
    const Vec3 x(u(rng), u(rng), u(rng));
    EXPECT_LT((T.apply(x) - screw_about_point(x, p, l, theta, d)).norm(), 1e-9);
  }
}

// Kinematics suite: fixed points, composition, point transport on 1k cases.
TEST(ScrewTransform, AxisPointsAreFixedUnderRotation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const PluckerAxis a = PluckerAxis::through(Vec3(u(rng), u(rng), u(rng)), random_unit(rng));
    const RigidTransform T = screw_transform(a, {u(rng), 0.0});
    for (double s : {-2.0, 0.0, 0.7, 3.0}) {
      const Vec3 q = a.foot() + s * a.l;
      worst = std::max(worst, (T.apply(q) - q).norm());
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(ScrewTransform, SameAxisScrewsCompose) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const PluckerAxis a = PluckerAxis::through(Vec3(u(rng), u(rng), u(rng)), random_unit(rng));
    const JointState s1{u(rng), u(rng)}, s2{u(rng), u(rng)};
    const RigidTransform lhs = screw_transform(a, {s1.theta + s2.theta, s1.d + s2.d});
    const RigidTransform a12 = screw_transform(a, s1) * screw_transform(a, s2);
    const RigidTransform a21 = screw_transform(a, s2) * screw_transform(a, s1);
    EXPECT_LT((lhs.R - a12.R).norm() + (lhs.t - a12.t).norm(), 1e-9);
    EXPECT_LT((a21.R - a12.R).norm() + (a21.t - a12.t).norm(), 1e-9);
  }
}

ArticulatedObject two_part_prismatic() {
  ArticulatedObject o;
  o.parts.resize(2);
  o.parts[0].bbox = Vec3(1, 1, 1);
  o.parts[1].translation = Vec3(0.2, 0.1, 0.6);
  o.parts[1].bbox = Vec3(0.5, 0.4, 0.2);
  o.joints.push_back({0, 1, PluckerAxis::through(Vec3(0.2, 0.1, 0.6), Vec3(0, 0, 1)), {0.0, 1.0}, {}});
  return o;
}

TEST(ForwardKinematics, ZeroStatesReproduceRestPoses) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 50; ++k) {
    const ArticulatedObject o = test::random_object(rng, 2 + k % 6, true);
    const auto poses = forward_kinematics(o, std::vector<JointState>(o.joints.size()));
    for (std::size_t i = 0; i < o.parts.size(); ++i) {
      const RigidTransform rest = o.parts[i].rest_pose();
      EXPECT_LT((poses[i].R - rest.R).norm() + (poses[i].t - rest.t).norm(), 1e-9);
    }
  }
}

TEST(ForwardKinematics, PrismaticTranslatesChild) {
  const ArticulatedObject o = two_part_prismatic();
  const auto poses = forward_kinematics(o, {{0.0, 0.3}});
  EXPECT_LT((poses[0].t - Vec3::Zero()).norm(), 1e-15);
  EXPECT_LT((poses[1].t - Vec3(0.2, 0.1, 0.9)).norm(), 1e-12);
  EXPECT_LT((poses[1].R - Mat3::Identity()).norm(), 1e-15);
}

TEST(ForwardKinematics, RevoluteChildMatchesPointOracle) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    const ArticulatedObject o = test::random_object(rng, 2, true);
    const Joint& j = o.joints[0];
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const JointState s{u(rng), u(rng)};
    const auto poses = forward_kinematics(o, {s});
    const Vec3 local(0.1, -0.2, 0.3);
    const Vec3 rest_point = o.parts[j.child].rest_pose().apply(local);
    const Vec3 expected = screw_about_point(rest_point, j.axis.foot(), j.axis.l, s.theta, s.d);
    // The root sits at its rest pose, so global motion is the screw about the global axis.
    ASSERT_EQ(o.root, j.parent);
    EXPECT_LT((poses[j.child].apply(local) - expected).norm(), 1e-9);
  }
}

TEST(ForwardKinematics, ChainInverseCompositionReturnsRest) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int k = 0; k < 100; ++k) {
    ArticulatedObject o = test::random_object(rng, 3, true);
    std::vector<JointState> q(o.joints.size()), neg(o.joints.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = {u(rng), u(rng)};
      neg[i] = {-q[i].theta, -q[i].d};
    }
    const auto posed = forward_kinematics(o, q);
    // Undo each joint in its own current frame: child * offset^-1 * T(-q) gives the rest relation.
    const auto rest = forward_kinematics(o, std::vector<JointState>(o.joints.size()));
    for (std::size_t i = 0; i < o.joints.size(); ++i) {
      const Joint& j = o.joints[i];
      const RigidTransform rel = posed[j.parent].inverse() * posed[j.child];
      const PluckerAxis local = axis_to_parent_frame(j.axis, o.parts[j.parent].rest_pose());
      const RigidTransform undone = screw_transform(local, neg[i]) * rel;
      const RigidTransform rest_rel = rest[j.parent].inverse() * rest[j.child];
      EXPECT_LT((undone.R - rest_rel.R).norm() + (undone.t - rest_rel.t).norm(), 1e-9);
    }
  }
}

TEST(ForwardKinematics, DeepChainsStayOrthonormal) {
  std::mt19937_64 rng(9);
  ArticulatedObject o;
  o.parts.resize(101);
  for (auto& p : o.parts) p.bbox = Vec3::Ones();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    o.joints.push_back({i, i + 1, PluckerAxis::through(Vec3(u(rng), u(rng), u(rng)), random_unit(rng)), {}, {-3, 3}});
  }
  std::vector<JointState> q(100);
  for (auto& s : q) s.theta = 3.0 * u(rng);
  const auto poses = forward_kinematics(o, q);
  for (const auto& T : poses) {
    EXPECT_LT((T.R.transpose() * T.R - Mat3::Identity()).norm(), 1e-7);
    EXPECT_NEAR(T.R.determinant(), 1.0, 1e-7);
  }
}

TEST(ForwardKinematics, RejectsBadTrees) {
  ArticulatedObject o = two_part_prismatic();
  EXPECT_THROW(forward_kinematics(o, {}), std::invalid_argument);
  o.joints[0].child = 0;
  EXPECT_THROW(forward_kinematics(o, {{}}), std::invalid_argument);
  ArticulatedObject loop;
  loop.parts.resize(3);
  loop.joints = {{1, 2, {}, {}, {}}, {2, 1, {}, {}, {}}};
  try {
    validate_tree(loop);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("loop"), std::string::npos);
  }
}

TEST(SampleJointStates, DegenerateRangesGiveZero) {
  ArticulatedObject o = two_part_prismatic();
  o.joints[0].prismatic = {};
  std::mt19937_64 rng(10);
  for (const auto& s : sample_joint_states(o, 20, rng)) {
    EXPECT_EQ(s[0].theta, 0.0);
    EXPECT_EQ(s[0].d, 0.0);
  }
}

TEST(SampleJointStates, UniformMeanAndDeterminism) {
  const ArticulatedObject o = two_part_prismatic();
  std::mt19937_64 rng(11), rng2(11);
  const auto a = sample_joint_states(o, 10000, rng);
  const auto b = sample_joint_states(o, 10000, rng2);
  double mean = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    mean += a[k][0].d;
    EXPECT_TRUE(o.joints[0].prismatic.contains(a[k][0].d));
    EXPECT_EQ(a[k][0].d, b[k][0].d);
  }
  EXPECT_NEAR(mean / 10000.0, 0.5, 0.02);
}

TEST(Instantiate, PointsLieOnUnitBoxSurface) {
  ArticulatedObject o;
  o.parts.resize(1);
  const PosedInstance inst = instantiate(o, {}, 500, {1, 0, 0});
  ASSERT_EQ(inst.points.cols(), 500);
  for (Eigen::Index c = 0; c < inst.points.cols(); ++c) {
    const Eigen::Vector3d a = inst.points.col(c).cwiseAbs();
    EXPECT_NEAR(a.maxCoeff(), 0.5, 1e-15);
    int on_face = 0;
    for (int k = 0; k < 3; ++k) on_face += std::abs(a[k] - 0.5) < 1e-15 ? 1 : 0;
    EXPECT_GE(on_face, 1);
  }
}

TEST(Instantiate, CountsAndKeyDeterminism) {
  std::mt19937_64 rng(12);
  const ArticulatedObject o = test::random_object(rng, 5, false);
  const std::vector<JointState> zero(o.joints.size());
  const PosedInstance a = instantiate(o, zero, 2048, {7, 1, 3});
  const PosedInstance b = instantiate(o, zero, 2048, {7, 1, 3});
  const PosedInstance c = instantiate(o, zero, 2048, {7, 2, 3});
  EXPECT_EQ(a.points.cols(), 2048);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
}

TEST(Instantiate, RigidTranslationMovesEveryPoint) {
  std::mt19937_64 rng(13);
  const ArticulatedObject o = test::random_object(rng, 4, true);
  ArticulatedObject moved = o;
  const Vec3 shift(0.4, -1.0, 2.5);
  for (auto& p : moved.parts) p.translation += shift;
  for (auto& j : moved.joints) j.axis = PluckerAxis::through(j.axis.foot() + shift, j.axis.l);
  std::vector<JointState> q(o.joints.size(), JointState{0.3, 0.1});
  const PosedInstance a = instantiate(o, q, 300, {1, 0, 0});
  const PosedInstance b = instantiate(moved, q, 300, {1, 0, 0});
  EXPECT_LT(((b.points.colwise() - shift) - a.points).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Instantiate, ZeroAreaBoxThrows) {
  ArticulatedObject o;
  o.parts.resize(1);
  o.parts[0].bbox = Vec3(1, 0, 0);
  EXPECT_THROW(instantiate(o, {}, 10, {}), std::invalid_argument);
}

TEST(NormalizeFrame, FitsUnitCubeAndPreservesMotion) {
  std::mt19937_64 rng(14);
  ArticulatedObject o = test::random_object(rng, 4, true);
  for (auto& p : o.parts) p.bbox *= 3.0;
  ArticulatedObject n = o;
  normalize_object_frame(n);
  const BoxMesh mesh = posed_box_mesh(n, forward_kinematics(n, std::vector<JointState>(n.joints.size())));
  Vec3 lo = Vec3::Constant(1e9), hi = Vec3::Constant(-1e9);
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  EXPECT_NEAR((hi - lo).maxCoeff(), 2.0, 1e-9);
  EXPECT_LT((hi + lo).norm(), 1e-9);
  // Revolute motion commutes with the similarity (prismatic lengths are scaled, so use theta only).
  std::vector<JointState> q(o.joints.size(), JointState{0.7, 0.0});
  const auto po = forward_kinematics(o, q);
  const auto pn = forward_kinematics(n, q);
  for (std::size_t i = 0; i < po.size(); ++i) EXPECT_LT((po[i].R - pn[i].R).norm(), 1e-9);
}

TEST(Fingerprint, ContentSensitive) {
  std::mt19937_64 rng(15);
  const ArticulatedObject o = test::random_object(rng, 3, false);
  ArticulatedObject p = o;
  EXPECT_EQ(object_fingerprint(o), object_fingerprint(p));
  p.parts[1].bbox.x() += 1e-12;
  EXPECT_NE(object_fingerprint(o), object_fingerprint(p));
}

}  // namespace
}  // namespace artdiff
