// Common aliases, error types and small utilities shared by all modules.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace stentnet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Malformed input file (syntax level).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally valid input that violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Constraint rows are rank-deficient beyond the expected structure.
class SingularSystem : public std::runtime_error {
 public:
  SingularSystem(const std::string& what, int numerical_rank)
      : std::runtime_error(what), numerical_rank(numerical_rank) {}
  int numerical_rank;
};

/// Solve finished but the recomputed residuals exceed the requested tolerance.
class ToleranceNotMet : public std::runtime_error {
 public:
  explicit ToleranceNotMet(const std::string& what) : std::runtime_error(what) {}
};

/// Right-hand side is incompatible with the (singular) operator.
class Unsolvable : public std::runtime_error {
 public:
  explicit Unsolvable(const std::string& what) : std::runtime_error(what) {}
};

/// Diagnostic: the block graph system is inconsistent, which cannot happen
/// for stents in class S.
class NotClassS : public std::runtime_error {
 public:
  explicit NotClassS(const std::string& what) : std::runtime_error(what) {}
};

/// Worker count for embarrassingly parallel sweeps. STENTNET_THREADS caps it;
/// unset means all cores.
inline int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("STENTNET_THREADS")) {
    long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
  }
  return static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n). Tasks must be independent; each writes only its
/// own slot, so results do not depend on the schedule.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace stentnet
