#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gnsspf/nlos.hpp"
#include "gnsspf/random.hpp"
#include "gnsspf/spp.hpp"

namespace gnsspf {

// One position hypothesis. The LOS subset from the last observation step is
// carried so the next prediction can select Doppler measurements.
struct Particle {
  EcefPosition position;
  double weight{0.0};
  std::optional<LosSubset> los_subset;
};

struct FilterConfig {
  int n_particles{500};
  double process_noise_sigma{0.5};  // m per sqrt(s), motion noise
  double likelihood_sigma{3.0};     // spread of the Mahalanobis likelihood
  double resample_threshold{0.5};   // resample when n_eff < threshold * N
  Thresholds thresholds{};
  std::uint64_t seed{1};
  bool resample_every_epoch{false};
  double init_covariance_inflation{2.0};
  double likelihood_floor{1e-12};
  double covariance_regularization{1e-4};  // m^2, added to Sigma_i
  double reference_min_elevation{10.0 * constants::kDeg2Rad};
  double reference_snr_weight{0.5};  // deg per dB-Hz

  void validate() const {
    if (n_particles < 10) throw std::invalid_argument("n_particles < 10");
    if (process_noise_sigma <= 0.0 || likelihood_sigma <= 0.0) {
      throw std::invalid_argument("filter sigmas must be positive");
    }
    if (!(resample_threshold > 0.0 && resample_threshold <= 1.0)) {
      throw std::invalid_argument("resample_threshold out of (0, 1]");
    }
    if (!thresholds.valid()) {
      throw std::invalid_argument("thresholds violate Eq. constraint");
    }
  }
};

struct FilterEstimate {
  EcefPosition position;
  Vec3 position_stddev{0.0, 0.0, 0.0};  // per ECEF axis, weighted
  double n_effective{0.0};
  bool dead_reckoned{false};
};

struct FilterStepInfo {
  FilterEstimate estimate;
  bool resampled{false};
  bool weights_reset{false};
  int n_excluded_mode{0};  // most common per-particle exclusion count
};

inline double mahalanobis(const Vec3& diff, const Mat3& covariance) {
  return std::sqrt(diff.dot(covariance.ldlt().solve(diff)));
}

inline std::vector<Particle> initialize_particles(const PositionSolution& fix,
                                                  const FilterConfig& cfg,
                                                  std::uint64_t epoch_index = 0) {
  if (!fix.converged) {
    throw std::runtime_error("initialize_particles: cannot initialize, SPP failed");
  }
  const Mat3 cov = cfg.init_covariance_inflation * fix.covariance;
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Mat3 l = es.eigenvectors() *
                 es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::vector<Particle> out(cfg.n_particles);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < cfg.n_particles; ++i) {
    auto engine = rng::stream(cfg.seed, 0x696e6974u ^ epoch_index, i);
    const Vec3 z(gauss(engine), gauss(engine), gauss(engine));
    out[i].position = EcefPosition(fix.position.vec() + l * z);
    out[i].weight = 1.0 / cfg.n_particles;
  }
  return out;
}

// Doppler motion model: each particle moves by its own LOS-subset velocity
// plus isotropic Gaussian noise with variance sigma^2 * dt.
inline void predict(std::vector<Particle>& particles,
                    const EpochContext& doppler_epoch, double dt,
                    const FilterConfig& cfg, std::uint64_t epoch_index) {
  if (!(dt > 0.0 && dt <= 1.0)) {
    throw std::invalid_argument("predict: dt out of (0, 1]");
  }
  const std::vector<SatelliteId> all;  // empty = all measurements
  const double noise_sigma = cfg.process_noise_sigma * std::sqrt(dt);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < particles.size(); ++i) {
    Particle& p = particles[i];
    std::optional<VelocitySolution> vel;
    if (p.los_subset) {
      vel = solve_velocity(doppler_epoch, p.los_subset->included, p.position);
    }
    if (!vel) {
      vel = solve_velocity(doppler_epoch, all, p.position);
    }
    const Vec3 v = vel ? vel->velocity : Vec3::Zero();
    auto engine = rng::stream(cfg.seed, 0x70726564u ^ epoch_index, i);
    const Vec3 w(gauss(engine), gauss(engine), gauss(engine));
    p.position = EcefPosition(p.position.vec() + v * dt + noise_sigma * w);
  }
}

struct LikelihoodResult {
  double p{0.0};
  LosSubset subset;
  PositionSolution solution;
};

// Observation model per particle: residuals at the hypothesis, LOS subset by
// threshold test, subset SPP seeded at the hypothesis, then a Gaussian of the
// Mahalanobis distance between hypothesis and subset solution.
inline LikelihoodResult likelihood(const Particle& particle,
                                   const EpochContext& ctx,
                                   const SatelliteId& reference,
                                   const FilterConfig& cfg) {
  LikelihoodResult out;
  const ResidualSet res = residuals(ctx, particle.position, reference);
  out.subset = los_subset(res, cfg.thresholds);
  out.solution = solve_subset(ctx, out.subset.included, particle.position);
  if (out.solution.degenerate || !out.solution.converged) {
    out.p = cfg.likelihood_floor;
    return out;
  }
  const Vec3 diff = particle.position - out.solution.position;
  const Mat3 sigma =
      out.solution.covariance +
      cfg.covariance_regularization * Mat3::Identity();
  const double d = mahalanobis(diff, sigma);
  const double s = cfg.likelihood_sigma;
  out.p = std::exp(-d * d / (2.0 * s * s)) / (std::sqrt(2.0 * constants::kPi) * s);
  out.p = std::max(out.p, cfg.likelihood_floor);
  return out;
}

// Multiplies weights by likelihoods and renormalizes. Returns true when the
// sum vanished and weights were reset to uniform.
inline bool update_weights(std::vector<Particle>& particles,
                           const std::vector<double>& likelihoods) {
  double sum = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    particles[i].weight *= likelihoods[i];
    sum += particles[i].weight;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    for (auto& p : particles) p.weight = 1.0 / particles.size();
    return true;
  }
  for (auto& p : particles) p.weight /= sum;
  return false;
}

inline double effective_sample_size(const std::vector<Particle>& particles) {
  double sum_sq = 0.0;
  for (const auto& p : particles) sum_sq += p.weight * p.weight;
  return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

// Low-variance systematic resampling; offspring counts stay within one of
// the expected weight * N.
inline void systematic_resample(std::vector<Particle>& particles, double u01) {
  const int n = static_cast<int>(particles.size());
  std::vector<Particle> out;
  out.reserve(n);
  double cumulative = particles[0].weight;
  int i = 0;
  for (int k = 0; k < n; ++k) {
    const double u = (k + u01) / n;
    while (u > cumulative && i + 1 < n) {
      cumulative += particles[++i].weight;
    }
    out.push_back(particles[i]);
    out.back().weight = 1.0 / n;
  }
  particles = std::move(out);
}

inline FilterEstimate estimate(const std::vector<Particle>& particles) {
  FilterEstimate est;
  if (particles.empty()) return est;
  double wsum = 0.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : particles) {
    mean += p.weight * p.position.vec();
    wsum += p.weight;
  }
  mean /= wsum;
  Vec3 var = Vec3::Zero();
  for (const auto& p : particles) {
    const Vec3 d = p.position.vec() - mean;
    var += p.weight * d.cwiseProduct(d);
  }
  var /= wsum;
  est.position = EcefPosition(mean);
  est.position_stddev = var.cwiseSqrt();
  est.n_effective = effective_sample_size(particles);
  return est;
}

// Weighted 3x3 particle spread, for ENU diagnostics.
inline Mat3 particle_covariance(const std::vector<Particle>& particles) {
  Vec3 mean = Vec3::Zero();
  double wsum = 0.0;
  for (const auto& p : particles) {
    mean += p.weight * p.position.vec();
    wsum += p.weight;
  }
  mean /= wsum;
  Mat3 cov = Mat3::Zero();
  for (const auto& p : particles) {
    const Vec3 d = p.position.vec() - mean;
    cov += p.weight * d * d.transpose();
  }
  return cov / wsum;
}

// Sequential filter state: initialize once, then one run_epoch per epoch.
class ParticleFilter {
 public:
  explicit ParticleFilter(const FilterConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
  }

  bool initialized() const { return !particles_.empty(); }
  const std::vector<Particle>& particles() const { return particles_; }
  const FilterConfig& config() const { return cfg_; }

  // Test hook: install an externally built cloud (e.g. a wide prior).
  void set_particles(std::vector<Particle> particles) {
    particles_ = std::move(particles);
  }

  void initialize(const EpochContext& ctx) {
    const PositionSolution fix = solve(ctx);
    particles_ = initialize_particles(fix, cfg_, epoch_index_);
  }

  FilterStepInfo run_epoch(const EpochContext& ctx) {
    FilterStepInfo info;
    if (!initialized()) {
      initialize(ctx);
    } else if (prev_time_) {
      const double dt = std::clamp(ctx.time - *prev_time_, 1e-3, 1.0);
      const EpochContext& doppler_epoch = prev_ctx_ ? *prev_ctx_ : ctx;
      predict(particles_, doppler_epoch, dt, cfg_, epoch_index_);
    }

    if (epoch_usable(ctx)) {
      const FilterEstimate prior = estimate(particles_);
      const SatelliteId reference =
          select_reference(ctx, prior.position, cfg_.reference_min_elevation,
                           cfg_.reference_snr_weight);
      std::vector<double> likelihoods(particles_.size());
      std::map<int, int> excluded_histogram;
      for (std::size_t i = 0; i < particles_.size(); ++i) {
        LikelihoodResult lr = likelihood(particles_[i], ctx, reference, cfg_);
        likelihoods[i] = lr.p;
        ++excluded_histogram[static_cast<int>(lr.subset.excluded.size())];
        particles_[i].los_subset = std::move(lr.subset);
      }
      info.weights_reset = update_weights(particles_, likelihoods);
      int best_count = -1;
      for (const auto& [n_excluded, count] : excluded_histogram) {
        if (count > best_count) {
          best_count = count;
          info.n_excluded_mode = n_excluded;
        }
      }
      const double n_eff = effective_sample_size(particles_);
      if (cfg_.resample_every_epoch ||
          n_eff < cfg_.resample_threshold * particles_.size()) {
        auto engine = rng::stream(cfg_.seed, 0x72736d70u, epoch_index_);
        systematic_resample(
            particles_,
            std::uniform_real_distribution<double>(0.0, 1.0)(engine));
        info.resampled = true;
      }
      info.estimate = estimate(particles_);
      info.estimate.n_effective = n_eff;
    } else {
      info.estimate = estimate(particles_);
      info.estimate.dead_reckoned = true;
    }

    prev_ctx_ = ctx;
    prev_time_ = ctx.time;
    ++epoch_index_;
    return info;
  }

 private:
  static bool epoch_usable(const EpochContext& ctx) {
    if (ctx.entries.size() < 2) return false;
    std::vector<const EpochEntry*> entries;
    for (const auto& e : ctx.entries) entries.push_back(&e);
    const auto cs = detail::constellations_of(entries);
    return ctx.entries.size() >= cs.size() + 3;
  }

  FilterConfig cfg_;
  std::vector<Particle> particles_;
  std::optional<EpochContext> prev_ctx_;
  std::optional<GnssTime> prev_time_;
  std::uint64_t epoch_index_{0};
};

}  // namespace gnsspf
