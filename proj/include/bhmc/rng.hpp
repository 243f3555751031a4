#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace bhmc {

/// Seeded random stream owned by a single chain. Not thread-safe; never
/// share one between chains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }

  /// Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }

  double exponential() { return exponential_(engine_); }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal_(engine_);
    return v;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::exponential_distribution<double> exponential_{1.0};
};

}  // namespace bhmc
