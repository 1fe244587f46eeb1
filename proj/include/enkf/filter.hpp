#pragma once

#include <cstdint>
#include <vector>

#include "enkf/updates.hpp"

// Multi-step linear-Gaussian filtering: the exact Kalman recursion and the
// square-root EnKF that tracks it with N particles.

namespace enkf {

struct FilterProblem {
  std::vector<Matrix> dynamics;      // M^(t), d x d, t = 1..T
  std::vector<Matrix> observation;   // A^(t), k x d
  std::vector<Vector> observations;  // y^(t)
  CovarianceMatrix gamma;            // constant noise covariance, PD
  Vector init_mean;
  CovarianceMatrix init_cov;

  FilterProblem(std::vector<Matrix> m, std::vector<Matrix> a, std::vector<Vector> y,
                CovarianceMatrix g, Vector mu0, CovarianceMatrix sigma0);
  Index steps() const noexcept { return static_cast<Index>(dynamics.size()); }
  Index state_dim() const noexcept { return init_mean.size(); }
};

struct FilterStep {
  Vector forecast_mean;
  CovarianceMatrix forecast_cov;
  Vector analysis_mean;
  CovarianceMatrix analysis_cov;
};

struct FilterTrace {
  std::vector<FilterStep> steps;
  std::vector<double> mean_drift;  // SR back-out drift per step; empty for the exact filter
};

// Exact recursion: C^(t) = M Sigma^(t-1) M^T, mu^(t) = M(m^(t), C^(t)),
// Sigma^(t) = C(C^(t)).
FilterTrace kalman_filter(const FilterProblem& fp);

// Ensemble recursion: propagate members, then a square-root analysis whose
// back-out preserves the ensemble mean (symmetric transform). The trace
// records the analysis ensemble's sample moments.
FilterTrace sr_enkf(const FilterProblem& fp, Index n, std::uint64_t seed);

}  // namespace enkf
