#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "deocc/core_math.hpp"
#include "deocc/random.hpp"

namespace deocc {

/// A scalar objective at a specific point together with its analytic gradient.
struct GradientProblem {
  Matrix point;
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
};

/// Named generator of random non-degenerate problems for one gradient.
struct GradientCase {
  std::string name;
  std::function<GradientProblem(Rng&)> draw;
};

struct GradcheckRow {
  std::string name;
  std::size_t points = 0;
  double worst_error = 0.0;
  bool pass = false;
};

/// One case per exported analytic gradient: ce_distill, instance_loss,
/// soft_instance_loss, pair_loss, triplet_loss, student_backprop.
std::vector<GradientCase> standard_gradient_cases();

/// Compares each case against central differences at `points` draws.
std::vector<GradcheckRow> run_gradcheck(const std::vector<GradientCase>& cases, std::size_t points, std::uint64_t seed,
                                        double tolerance = 1e-4, double step = 1e-3);

}  // namespace deocc
