#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lensdff/features.hpp"
#include "lensdff/hand.hpp"
#include "lensdff/sampler.hpp"
#include "lensdff/spatial_index.hpp"

namespace lensdff {

enum class GradientMode { Analytic, FiniteDifference };

struct OptimConfig {
  int iterations = 300;
  double learning_rate = 1e-2;
  double lambda_norm = 1e-2;
  int n_seeds = 10;
  int knn_k = 8;
  double eps = 1e-6;
  double fd_step = 1e-4;
  double rot6d_scale = 0.1;     // column norm of the seed's Rot6D; sets rotational step size
  GradientMode gradient_mode = GradientMode::Analytic;
  int threads = 0;              // 0: LENSDFF_THREADS or hardware concurrency
  bool record_states = false;   // keep every iterate for trace export

  void validate() const;
};

struct EnergyBreakdown {
  double e_feat = 0.0;
  double e_norm = 0.0;
  double total = 0.0;
};

/// Spatially indexed feature cloud, the test side of the feature energy.
struct FeatureField {
  SpatialIndex index;
  Eigen::MatrixXd features;

  FeatureField() = default;
  FeatureField(const Eigen::Matrix3Xd& points, Eigen::MatrixXd feats);
  explicit FeatureField(const DistilledCloud& cloud) : FeatureField(cloud.points, cloud.features) {}

  Eigen::Index dim() const { return features.rows(); }
};

/// Neighbour sets per hand surface point, reused to hold the k-NN assignment fixed.
using NeighborSets = std::vector<std::vector<Neighbor>>;

/// E(g_p) = E_feat + lambda * E_norm for one seed. The optimization variable is
/// the flattened ReducedGrasp [translation(3), rot6d(6), synergy(k)].
///
/// E_feat = (1/N) sum_n |f_demo_n - f_test(q_n)|^2, with f_test the normalized
/// inverse-square-distance blend of the k nearest cloud features.
/// E_norm = 1 - <x(g_p), x_init>, x the first column of the palm rotation.
class GraspEnergy {
 public:
  GraspEnergy(const HandModel& hand, const EigengraspMap& map, const GraspFeature& demo_feature,
              const FeatureField& field, const Vec3d& init_x, const OptimConfig& cfg);

  EnergyBreakdown evaluate(const Eigen::VectorXd& x, NeighborSets* neighbors_out = nullptr) const;
  EnergyBreakdown evaluate_frozen(const Eigen::VectorXd& x, const NeighborSets& neighbors) const;

  /// Closed-form gradient with the neighbour sets taken at x.
  Eigen::VectorXd analytic_gradient(const Eigen::VectorXd& x, EnergyBreakdown* energy = nullptr) const;
  /// Central differences with neighbour sets frozen at x.
  Eigen::VectorXd finite_difference_gradient(const Eigen::VectorXd& x, EnergyBreakdown* energy = nullptr) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x, EnergyBreakdown* energy = nullptr) const;

  const EigengraspMap& map() const { return map_; }
  const HandModel& hand() const { return hand_; }

 private:
  EnergyBreakdown run(const Eigen::VectorXd& x, const NeighborSets* frozen, NeighborSets* out,
                      Eigen::VectorXd* grad) const;

  const HandModel& hand_;
  const EigengraspMap& map_;
  const GraspFeature& demo_;
  const FeatureField& field_;
  Vec3d init_x_;
  OptimConfig cfg_;
};

/// One-shot energy evaluation; builds the spatial index of `test_cloud`.
EnergyBreakdown energy(const ReducedGrasp& g, const EigengraspMap& map, const HandModel& hand,
                       const GraspFeature& demo_feature, const DistilledCloud& test_cloud,
                       const Vec3d& init_x, const OptimConfig& cfg);

Eigen::VectorXd gradient(const ReducedGrasp& g, const EigengraspMap& map, const HandModel& hand,
                         const GraspFeature& demo_feature, const DistilledCloud& test_cloud,
                         const Vec3d& init_x, const OptimConfig& cfg);

struct SeedResult {
  int seed_index = 0;
  bool failed = false;
  std::string failure;
  ReducedGrasp initial;
  ReducedGrasp last;            // final iterate
  ReducedGrasp best;            // lowest total energy seen
  Grasp best_grasp;             // best, expanded
  EnergyBreakdown best_energy;
  EnergyBreakdown initial_energy;
  std::vector<EnergyBreakdown> trace;   // iterations + 1 entries, trace[0] at the seed
  std::vector<double> best_so_far;      // running minimum of trace totals
  std::vector<Eigen::VectorXd> states;  // filled when cfg.record_states
};

struct OptimResult {
  std::vector<SeedResult> seeds;  // by seed index
  std::vector<int> ranking;       // seed indices, ascending best energy, failed seeds excluded
};

/// Plain gradient descent for cfg.iterations steps, with the synergy projected
/// back into its feasible interval after every step. Reports the best iterate.
SeedResult optimize(const GraspSeed& seed, const GraspFeature& demo_feature, const FeatureField& field,
                    const HandModel& hand, const OptimConfig& cfg, int seed_index = 0);

/// Ranks non-failed seeds by best total energy, ties by seed index.
std::vector<int> rank_seeds(const std::vector<SeedResult>& seeds);

/// Independent per-seed optimization; throws AllSeedsFailed when no seed survives.
OptimResult optimize_batch(const std::vector<GraspSeed>& seeds, const GraspFeature& demo_feature,
                           const FeatureField& field, const HandModel& hand, const OptimConfig& cfg);

}  // namespace lensdff
