#include "lensdff/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lensdff/parallel.hpp"

namespace lensdff {

void OptimConfig::validate() const {
  const auto fail = [](const char* m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (iterations < 1) fail("optimizer.iterations must be positive");
  if (!(learning_rate > 0.0)) fail("optimizer.learning_rate must be positive");
  if (!(lambda_norm > 0.0)) fail("optimizer.lambda_norm must be positive");
  if (n_seeds < 1) fail("optimizer.n_seeds must be positive");
  if (knn_k < 1) fail("optimizer.knn_k must be positive");
  if (!(eps > 0.0)) fail("optimizer.eps must be positive");
  if (!(fd_step > 0.0)) fail("optimizer.fd_step must be positive");
  if (!(rot6d_scale > 0.0)) fail("optimizer.rot6d_scale must be positive");
}

FeatureField::FeatureField(const Eigen::Matrix3Xd& points, Eigen::MatrixXd feats)
    : index(points), features(std::move(feats)) {
  if (features.cols() != index.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature field needs one feature per point");
  }
}

GraspEnergy::GraspEnergy(const HandModel& hand, const EigengraspMap& map, const GraspFeature& demo_feature,
                         const FeatureField& field, const Vec3d& init_x, const OptimConfig& cfg)
    : hand_(hand), map_(map), demo_(demo_feature), field_(field), init_x_(init_x), cfg_(cfg) {
  if (demo_.count() != hand_.surface_count()) {
    throw Error(ErrorCode::DimensionMismatch, "demo grasp feature has " + std::to_string(demo_.count()) +
                                                  " blocks, hand has " +
                                                  std::to_string(hand_.surface_count()) + " surface points");
  }
  if (demo_.dim() != field_.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "demo and test feature dimensions differ");
  }
  if (field_.index.size() == 0) throw Error(ErrorCode::EmptyCloud, "test cloud is empty");
}

EnergyBreakdown GraspEnergy::run(const Eigen::VectorXd& x, const NeighborSets* frozen, NeighborSets* out,
                                 Eigen::VectorXd* grad) const {
  const int k = map_.synergy_dim();
  if (x.size() != 9 + k) throw Error(ErrorCode::DimensionMismatch, "state size differs from 9 + synergy dim");
  const Vec3d t = x.head<3>();
  const Rot6Dd r6 = x.segment<6>(3);
  const Eigen::VectorXd s = x.tail(k);
  const Mat3d R = rot6d_to_rotation(r6);

  JointVector joints = map_.rest;
  std::array<bool, kJointCount> free{};
  for (int r = 0; r < kJointCount; ++r) {
    if (!map_.active[static_cast<std::size_t>(r)]) continue;
    const double v = map_.rest[r] + map_.expansion.row(r).dot(s);
    free[static_cast<std::size_t>(r)] = v >= hand_.limits.lower[r] && v <= hand_.limits.upper[r];
    joints[r] = std::clamp(v, hand_.limits.lower[r], hand_.limits.upper[r]);
  }
  const Eigen::Matrix3Xd local = surface_points_local(hand_, joints);
  const Eigen::Matrix3Xd world = (R * local).colwise() + t;
  const Eigen::Index n_points = local.cols();
  const double inv_n = 1.0 / static_cast<double>(n_points);

  JointFrames frames;
  Vec3d grad_t = Vec3d::Zero();
  Mat3d grad_R = Mat3d::Zero();
  JointVector grad_joints = JointVector::Zero();
  if (grad) frames = joint_frames(hand_, joints);
  if (out) out->assign(static_cast<std::size_t>(n_points), {});

  std::vector<Neighbor> nbrs;
  std::vector<double> u;
  double e_feat = 0.0;
  for (Eigen::Index n = 0; n < n_points; ++n) {
    const Vec3d q = world.col(n);
    if (frozen) {
      nbrs = (*frozen)[static_cast<std::size_t>(n)];
      for (auto& nb : nbrs) nb.squared_distance = (field_.index.points().col(nb.index) - q).squaredNorm();
    } else {
      field_.index.knn(q, cfg_.knn_k, nbrs);
    }
    u.resize(nbrs.size());
    double total_u = 0.0;
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      u[i] = 1.0 / (nbrs[i].squared_distance + cfg_.eps);
      total_u += u[i];
    }
    Eigen::VectorXd blended = Eigen::VectorXd::Zero(field_.dim());
    for (std::size_t i = 0; i < nbrs.size(); ++i) blended += (u[i] / total_u) * field_.features.col(nbrs[i].index);
    const Eigen::VectorXd residual = blended - demo_.blocks.col(n);
    e_feat += residual.squaredNorm();

    if (grad) {
      // d|r|^2/dq through the normalized weights, neighbour set held fixed.
      const double r_dot_blend = residual.dot(blended);
      Vec3d sum_du = Vec3d::Zero();
      Vec3d sum_a_du = Vec3d::Zero();
      for (std::size_t i = 0; i < nbrs.size(); ++i) {
        const Vec3d du = -2.0 * u[i] * u[i] * (q - field_.index.points().col(nbrs[i].index));
        sum_du += du;
        sum_a_du += residual.dot(field_.features.col(nbrs[i].index)) * du;
      }
      const Vec3d g = (2.0 * inv_n / total_u) * (sum_a_du - r_dot_blend * sum_du);
      grad_t += g;
      grad_R += g * local.col(n).transpose();
      const SurfacePoint& sp = hand_.surface[static_cast<std::size_t>(n)];
      if (sp.link != Link::Palm) {
        const Vec3d g_local = R.transpose() * g;
        for (int j : joints_moving(sp.finger, sp.link)) {
          const auto ju = static_cast<std::size_t>(j);
          grad_joints[j] += g_local.dot(frames.axis[ju].cross(local.col(n) - frames.origin[ju]));
        }
      }
    }
    if (out) (*out)[static_cast<std::size_t>(n)] = nbrs;
  }

  EnergyBreakdown e;
  e.e_feat = e_feat * inv_n;
  e.e_norm = 1.0 - R.col(0).dot(init_x_);
  e.total = e.e_feat + cfg_.lambda_norm * e.e_norm;

  if (grad) {
    grad_R.col(0) -= cfg_.lambda_norm * init_x_;
    // Back through Gram-Schmidt: e1 = a1/|a1|, b2 = a2 - <e1,a2> e1, e2 = b2/|b2|, e3 = e1 x e2.
    const Vec3d a1 = r6.head<3>();
    const Vec3d a2 = r6.tail<3>();
    const Vec3d e1 = R.col(0);
    const Vec3d e2 = R.col(1);
    const double n1 = a1.norm();
    const double n2 = (a2 - e1.dot(a2) * e1).norm();
    Vec3d g1 = grad_R.col(0) + e2.cross(grad_R.col(2));
    const Vec3d g2 = grad_R.col(1) + grad_R.col(2).cross(e1);
    const Vec3d gb = (g2 - e2 * e2.dot(g2)) / n2;
    const Vec3d g_a2 = gb - e1 * e1.dot(gb);
    g1 += -e1.dot(gb) * a2 - e1.dot(a2) * gb;
    const Vec3d g_a1 = (g1 - e1 * e1.dot(g1)) / n1;

    grad->resize(x.size());
    grad->head<3>() = grad_t;
    grad->segment<3>(3) = g_a1;
    grad->segment<3>(6) = g_a2;
    for (int c = 0; c < k; ++c) {
      double acc = 0.0;
      for (int r = 0; r < kJointCount; ++r) {
        if (free[static_cast<std::size_t>(r)]) acc += map_.expansion(r, c) * grad_joints[r];
      }
      (*grad)[9 + c] = acc;
    }
  }
  return e;
}

EnergyBreakdown GraspEnergy::evaluate(const Eigen::VectorXd& x, NeighborSets* neighbors_out) const {
  return run(x, nullptr, neighbors_out, nullptr);
}

EnergyBreakdown GraspEnergy::evaluate_frozen(const Eigen::VectorXd& x, const NeighborSets& neighbors) const {
  return run(x, &neighbors, nullptr, nullptr);
}

Eigen::VectorXd GraspEnergy::analytic_gradient(const Eigen::VectorXd& x, EnergyBreakdown* energy) const {
  Eigen::VectorXd g;
  const EnergyBreakdown e = run(x, nullptr, nullptr, &g);
  if (energy) *energy = e;
  return g;
}

Eigen::VectorXd GraspEnergy::finite_difference_gradient(const Eigen::VectorXd& x, EnergyBreakdown* energy) const {
  NeighborSets frozen;
  const EnergyBreakdown e = run(x, nullptr, &frozen, nullptr);
  if (energy) *energy = e;
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + cfg_.fd_step;
    const double plus = evaluate_frozen(probe, frozen).total;
    probe[i] = x[i] - cfg_.fd_step;
    const double minus = evaluate_frozen(probe, frozen).total;
    probe[i] = x[i];
    g[i] = (plus - minus) / (2.0 * cfg_.fd_step);
  }
  return g;
}

Eigen::VectorXd GraspEnergy::gradient(const Eigen::VectorXd& x, EnergyBreakdown* energy) const {
  return cfg_.gradient_mode == GradientMode::Analytic ? analytic_gradient(x, energy)
                                                      : finite_difference_gradient(x, energy);
}

EnergyBreakdown energy(const ReducedGrasp& g, const EigengraspMap& map, const HandModel& hand,
                       const GraspFeature& demo_feature, const DistilledCloud& test_cloud,
                       const Vec3d& init_x, const OptimConfig& cfg) {
  if (test_cloud.size() == 0) throw Error(ErrorCode::EmptyCloud, "test cloud is empty");
  const FeatureField field(test_cloud);
  return GraspEnergy(hand, map, demo_feature, field, init_x, cfg).evaluate(g.flatten());
}

Eigen::VectorXd gradient(const ReducedGrasp& g, const EigengraspMap& map, const HandModel& hand,
                         const GraspFeature& demo_feature, const DistilledCloud& test_cloud,
                         const Vec3d& init_x, const OptimConfig& cfg) {
  if (test_cloud.size() == 0) throw Error(ErrorCode::EmptyCloud, "test cloud is empty");
  const FeatureField field(test_cloud);
  return GraspEnergy(hand, map, demo_feature, field, init_x, cfg).gradient(g.flatten());
}

namespace {

bool finite(const EnergyBreakdown& e) {
  return std::isfinite(e.e_feat) && std::isfinite(e.e_norm) && std::isfinite(e.total);
}

}  // namespace

SeedResult optimize(const GraspSeed& seed, const GraspFeature& demo_feature, const FeatureField& field,
                    const HandModel& hand, const OptimConfig& cfg, int seed_index) {
  cfg.validate();
  const EigengraspMap& map = hand.eigengrasp(seed.primitive);
  SeedResult res;
  res.seed_index = seed_index;
  res.initial = seed.reduced();
  res.initial.rotation *= cfg.rot6d_scale;
  res.best = res.last = res.initial;
  try {
    const GraspEnergy objective(hand, map, demo_feature, field, seed.init_x_axis, cfg);
    const auto bounds = synergy_bounds(map, hand.limits);
    Eigen::VectorXd x = res.initial.flatten();
    Eigen::VectorXd best_x = x;
    double best_total = std::numeric_limits<double>::infinity();
    res.trace.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
    res.best_so_far.reserve(static_cast<std::size_t>(cfg.iterations) + 1);

    const auto record = [&](const EnergyBreakdown& e) {
      if (!finite(e)) throw Error(ErrorCode::NonFiniteEnergy, "energy became non-finite");
      res.trace.push_back(e);
      if (cfg.record_states) res.states.push_back(x);
      if (e.total < best_total) {
        best_total = e.total;
        best_x = x;
        res.best_energy = e;
      }
      res.best_so_far.push_back(best_total);
    };

    for (int it = 0; it < cfg.iterations; ++it) {
      EnergyBreakdown e;
      const Eigen::VectorXd g = objective.gradient(x, &e);
      record(e);
      if (!g.allFinite()) throw Error(ErrorCode::NonFiniteEnergy, "gradient became non-finite");
      x -= cfg.learning_rate * g;
      x.tail(map.synergy_dim()) = clamp_synergy(x.tail(map.synergy_dim()), bounds);
    }
    record(objective.evaluate(x));

    res.initial_energy = res.trace.front();
    res.last = ReducedGrasp::unflatten(x);
    res.best = ReducedGrasp::unflatten(best_x);
    res.best_grasp = eigen_expand(res.best, map, hand.limits);
  } catch (const Error& err) {
    res.failed = true;
    res.failure = err.what();
  }
  return res;
}

std::vector<int> rank_seeds(const std::vector<SeedResult>& seeds) {
  std::vector<int> order;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!seeds[i].failed) order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ea = seeds[static_cast<std::size_t>(a)].best_energy.total;
    const double eb = seeds[static_cast<std::size_t>(b)].best_energy.total;
    if (ea != eb) return ea < eb;
    return seeds[static_cast<std::size_t>(a)].seed_index < seeds[static_cast<std::size_t>(b)].seed_index;
  });
  return order;
}

OptimResult optimize_batch(const std::vector<GraspSeed>& seeds, const GraspFeature& demo_feature,
                           const FeatureField& field, const HandModel& hand, const OptimConfig& cfg) {
  cfg.validate();
  OptimResult out;
  out.seeds.resize(seeds.size());
  parallel_for(seeds.size(), cfg.threads, [&](std::size_t i) {
    out.seeds[i] = optimize(seeds[i], demo_feature, field, hand, cfg, static_cast<int>(i));
  });
  out.ranking = rank_seeds(out.seeds);
  if (out.ranking.empty()) {
    throw Error(ErrorCode::AllSeedsFailed,
                seeds.empty() ? "no seeds to optimize" : "every seed failed: " + out.seeds.front().failure);
  }
  return out;
}

}  // namespace lensdff
