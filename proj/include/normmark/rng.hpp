#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace normmark {

// Deterministic source of the noise the model consumes. Every draw goes
// through one engine so a run is reproducible from (seed, call sequence),
// and a finite-difference harness can replay the exact same noise by
// reseeding before each evaluation.
class NoiseSource {
 public:
  explicit NoiseSource(uint64_t seed) : rng_(seed) {}

  Eigen::VectorXd normal(int d) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd out(d);
    for (int i = 0; i < d; ++i) out[i] = n(rng_);
    return out;
  }

  Eigen::VectorXd gumbel(int d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd out(d);
    for (int i = 0; i < d; ++i) {
      double x = u(rng_);
      if (x < 1e-300) x = 1e-300;
      out[i] = -std::log(-std::log(x));
    }
    return out;
  }

  // Inverted-dropout mask: entries are 0 or 1/(1-p).
  Eigen::VectorXd dropout_mask(int d, double p) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd out(d);
    const double keep = 1.0 - p;
    for (int i = 0; i < d; ++i) out[i] = (u(rng_) < keep) ? 1.0 / keep : 0.0;
    return out;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace normmark
