#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "screenlab/corpus.hpp"

namespace screenlab {

using EmotionVector = std::array<double, kNumEmotions>;

struct DirichletParams {
  EmotionVector alpha{};
  double alpha0 = 0.0;
  std::size_t n_samples = 0;
  bool converged = false;
  int iterations = 0;
  /// Total log-likelihood of the (smoothed) samples at `alpha`.
  double log_likelihood = 0.0;
};

struct DirichletFitOptions {
  /// Entries below epsilon are clamped to epsilon before renormalizing.
  double epsilon = 1e-6;
  double tol = 1e-10;
  int max_iter = 1000;
  /// Precision at which the fit is declared divergent (zero-variance data).
  double max_alpha0 = 1e7;
};

/// Clamps every entry to >= epsilon and renormalizes.
EmotionVector smooth(const EmotionDistribution& d, double epsilon);

/// Running sums over smoothed samples; enough to fit a Dirichlet without
/// revisiting the samples. Mergeable, so cluster bootstraps can assemble a
/// replicate from per-film blocks.
class DirichletSufficientStats {
 public:
  void add(const EmotionVector& smoothed);
  void merge(const DirichletSufficientStats& other);

  std::size_t n() const noexcept { return n_; }
  EmotionVector mean_log() const;
  EmotionVector mean() const;
  EmotionVector mean_square() const;
  /// True when every added sample is bit-identical (the MLE diverges).
  bool zero_variance() const noexcept { return n_ > 0 && identical_; }

 private:
  EmotionVector sum_log_{};
  EmotionVector sum_{};
  EmotionVector sum_sq_{};
  EmotionVector first_{};
  std::size_t n_ = 0;
  bool identical_ = true;
};

/// n [logG(a0) - sum_j logG(a_j)] + sum_j (a_j - 1) sum_i log p_ij.
/// Samples must be strictly positive (smooth them first); throws DomainError
/// otherwise.
double dirichlet_log_likelihood(const EmotionVector& alpha,
                                std::span<const EmotionDistribution> samples);

/// Maximum-likelihood Dirichlet fit (Minka's fixed point
///   psi(a_j') = psi(a0) + mean_i log p_ij
/// started from the method-of-moments estimate). Samples are smoothed with
/// options.epsilon first. Requires n >= 2.
///
/// Never fails silently: if the iteration does not settle within max_iter,
/// or the data have zero variance and a0 would diverge (capped at
/// max_alpha0), the result carries converged = false.
DirichletParams dirichlet_mle(std::span<const EmotionDistribution> samples,
                              const DirichletFitOptions& options = {});

/// Same fit from precomputed sufficient statistics.
DirichletParams dirichlet_mle(const DirichletSufficientStats& stats,
                              const DirichletFitOptions& options = {});

/// Differential entropy in nats:
///   log B(a) + (a0 - K) psi(a0) - sum_j (a_j - 1) psi(a_j).
double dirichlet_entropy(const EmotionVector& alpha);

}  // namespace screenlab
