#pragma once

#include <cstddef>
#include <vector>

namespace pinnctl {

/// Trainable parameter count of a fully-connected stack, biases included:
/// sum over layers of (fan_in + 1) * fan_out. Serves as the hypothesis-count
/// stand-in for the generalization bound.
std::size_t model_complexity(const std::vector<int>& layer_sizes);

/// One-sided generalization bound: sqrt((ln|H| + ln(2/delta)) / (2m)).
/// Requires |H| >= 1, m >= 1, delta in (0, 1).
double hoeffding_bound(std::size_t hypothesis_count, std::size_t m, double delta);

struct GapReport {
    double r_test = 0.0;
    double r_emp = 0.0;
    double bound = 0.0;
    double e_gen = 0.0; // r_test - r_emp
    bool pass = false;  // r_test <= r_emp + bound, evaluated exactly
};

/// Audits an observed train/validation error pair against a bound. Units are
/// the caller's (fractions or percent), as the inequality is scale-free.
GapReport gap_audit(double r_test, double r_emp, double bound);

} // namespace pinnctl
