#include "screenlab/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "screenlab/error.hpp"
#include "screenlab/special.hpp"

namespace screenlab {

namespace {

constexpr std::size_t K = kNumEmotions;

double sum_of(const EmotionVector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double per_sample_log_likelihood(const EmotionVector& alpha, double alpha0,
                                 const EmotionVector& mean_log) {
  double ll = std::lgamma(alpha0);
  for (std::size_t j = 0; j < K; ++j) {
    ll += -std::lgamma(alpha[j]) + (alpha[j] - 1.0) * mean_log[j];
  }
  return ll;
}

/// Method of moments: a0 from each coordinate's mean and variance,
/// averaged over the coordinates where it is defined.
EmotionVector moment_estimate(const DirichletSufficientStats& stats) {
  const auto m = stats.mean();
  const auto sq = stats.mean_square();
  double total = 0.0;
  int used = 0;
  for (std::size_t j = 0; j < K; ++j) {
    const double var = sq[j] - m[j] * m[j];
    if (var <= 0.0 || m[j] <= 0.0 || m[j] >= 1.0) continue;
    const double s = m[j] * (1.0 - m[j]) / var - 1.0;
    if (s > 0.0 && std::isfinite(s)) {
      total += s;
      ++used;
    }
  }
  EmotionVector alpha;
  if (used == 0) {
    alpha.fill(1.0);
    return alpha;
  }
  const double s = total / used;
  for (std::size_t j = 0; j < K; ++j) alpha[j] = std::max(s * m[j], 1e-3);
  return alpha;
}

}  // namespace

EmotionVector smooth(const EmotionDistribution& d, double epsilon) {
  EmotionVector v = d.probs();
  double sum = 0.0;
  for (double& p : v) {
    p = std::max(p, epsilon);
    sum += p;
  }
  for (double& p : v) p /= sum;
  return v;
}

void DirichletSufficientStats::add(const EmotionVector& smoothed) {
  if (n_ == 0) {
    first_ = smoothed;
  } else if (identical_ && smoothed != first_) {
    identical_ = false;
  }
  for (std::size_t j = 0; j < K; ++j) {
    sum_log_[j] += std::log(smoothed[j]);
    sum_[j] += smoothed[j];
    sum_sq_[j] += smoothed[j] * smoothed[j];
  }
  ++n_;
}

void DirichletSufficientStats::merge(const DirichletSufficientStats& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  identical_ = identical_ && other.identical_ && first_ == other.first_;
  for (std::size_t j = 0; j < K; ++j) {
    sum_log_[j] += other.sum_log_[j];
    sum_[j] += other.sum_[j];
    sum_sq_[j] += other.sum_sq_[j];
  }
  n_ += other.n_;
}

EmotionVector DirichletSufficientStats::mean_log() const {
  EmotionVector out;
  for (std::size_t j = 0; j < K; ++j) out[j] = sum_log_[j] / static_cast<double>(n_);
  return out;
}

EmotionVector DirichletSufficientStats::mean() const {
  EmotionVector out;
  for (std::size_t j = 0; j < K; ++j) out[j] = sum_[j] / static_cast<double>(n_);
  return out;
}

EmotionVector DirichletSufficientStats::mean_square() const {
  EmotionVector out;
  for (std::size_t j = 0; j < K; ++j) out[j] = sum_sq_[j] / static_cast<double>(n_);
  return out;
}

double dirichlet_log_likelihood(const EmotionVector& alpha,
                                std::span<const EmotionDistribution> samples) {
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("Dirichlet alpha must be positive");
  }
  EmotionVector sum_log{};
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < K; ++j) {
      if (!(s[j] > 0.0)) {
        throw DomainError("Dirichlet log-likelihood needs strictly positive samples; smooth first");
      }
      sum_log[j] += std::log(s[j]);
    }
  }
  const double n = static_cast<double>(samples.size());
  double ll = n * std::lgamma(sum_of(alpha));
  for (std::size_t j = 0; j < K; ++j) ll += -n * std::lgamma(alpha[j]) + (alpha[j] - 1.0) * sum_log[j];
  return ll;
}

DirichletParams dirichlet_mle(std::span<const EmotionDistribution> samples,
                              const DirichletFitOptions& options) {
  DirichletSufficientStats stats;
  for (const auto& s : samples) stats.add(smooth(s, options.epsilon));
  return dirichlet_mle(stats, options);
}

DirichletParams dirichlet_mle(const DirichletSufficientStats& stats,
                              const DirichletFitOptions& options) {
  if (stats.n() < 2) throw InsufficientDataError("dirichlet_mle", stats.n(), 2);
  const double n = static_cast<double>(stats.n());
  const auto mean_log = stats.mean_log();

  DirichletParams out;
  out.n_samples = stats.n();

  auto finish = [&](const EmotionVector& alpha, bool converged, int iterations) {
    out.alpha = alpha;
    out.alpha0 = sum_of(alpha);
    out.converged = converged;
    out.iterations = iterations;
    out.log_likelihood = n * per_sample_log_likelihood(alpha, out.alpha0, mean_log);
    return out;
  };

  if (stats.zero_variance()) {
    // The likelihood grows without bound along a0; report the capped point.
    EmotionVector alpha = stats.mean();
    for (double& a : alpha) a *= options.max_alpha0;
    return finish(alpha, false, 0);
  }

  EmotionVector alpha = moment_estimate(stats);
  double alpha0 = sum_of(alpha);
  double ll = per_sample_log_likelihood(alpha, alpha0, mean_log);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const double psi0 = special::digamma(alpha0);
    EmotionVector next;
    double max_step = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      next[j] = special::inverse_digamma(psi0 + mean_log[j]);
      // Relative above 1 so the test stays meaningful for large precisions.
      max_step = std::max(max_step, std::fabs(next[j] - alpha[j]) / std::max(1.0, alpha[j]));
    }
    const double next_alpha0 = sum_of(next);
    const double next_ll = per_sample_log_likelihood(next, next_alpha0, mean_log);
    if (next_ll < ll - 1e-9 * (1.0 + std::fabs(ll))) {
      throw std::logic_error("Dirichlet fixed point decreased the log-likelihood");
    }
    alpha = next;
    alpha0 = next_alpha0;
    ll = next_ll;
    if (alpha0 > options.max_alpha0) {
      for (double& a : alpha) a *= options.max_alpha0 / alpha0;
      return finish(alpha, false, iter);
    }
    if (max_step <= options.tol) return finish(alpha, true, iter);
  }
  return finish(alpha, false, options.max_iter);
}

double dirichlet_entropy(const EmotionVector& alpha) {
  double alpha0 = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("Dirichlet alpha must be positive");
    alpha0 += a;
  }
  double log_beta = -std::lgamma(alpha0);
  double tail = 0.0;
  for (double a : alpha) {
    log_beta += std::lgamma(a);
    tail += (a - 1.0) * special::digamma(a);
  }
  return log_beta + (alpha0 - static_cast<double>(K)) * special::digamma(alpha0) - tail;
}

}  // namespace screenlab
