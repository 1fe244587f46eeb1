#pragma once

#include <cstdint>
#include <utility>

#include "enkf/eki.hpp"

// Independent brute-force references, kept structurally separate from the
// code paths they validate. Formulas here use explicit inverses and full
// expansions on purpose: slower, simpler, independently auditable.

namespace enkf::oracle {

// Direct evaluation of the posterior mean/covariance displays with an
// explicit inverse of the k x k innovation matrix.
std::pair<Vector, CovarianceMatrix> exact_posterior(const Vector& m, const CovarianceMatrix& c,
                                                    const LinearProblem& problem);

// Four-term expansion of the perturbed-observation updated sample covariance,
// evaluated verbatim from the prior ensemble and the supplied perturbations.
SymmetricMatrix po_covariance_expansion(const Ensemble& e, const Matrix& perturbations,
                                        const LinearProblem& problem);

// Single oracle entry point for the mean-field moments (delegates to the
// Monte Carlo population moments).
PopulationMoments mean_field_reference(const GaussianPrior& prior, const ForwardMap& forward,
                                       Index n_ref, std::uint64_t seed);

}  // namespace enkf::oracle
