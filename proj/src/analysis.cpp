#include "pinnctl/analysis.hpp"

#include <cmath>

#include "pinnctl/errors.hpp"

namespace pinnctl {

std::size_t model_complexity(const std::vector<int>& layer_sizes) {
    if (layer_sizes.size() < 2) throw ConfigError("need at least an input and an output layer");
    std::size_t total = 0;
    for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
        if (layer_sizes[l - 1] < 1 || layer_sizes[l] < 1)
            throw ConfigError("layer sizes must be positive");
        total += static_cast<std::size_t>(layer_sizes[l - 1] + 1) *
                 static_cast<std::size_t>(layer_sizes[l]);
    }
    return total;
}

double hoeffding_bound(std::size_t hypothesis_count, std::size_t m, double delta) {
    if (hypothesis_count < 1) throw ConfigError("hypothesis count must be >= 1");
    if (m < 1) throw ConfigError("sample count must be >= 1");
    if (!(delta > 0.0) || !(delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    const double numerator =
        std::log(static_cast<double>(hypothesis_count)) + std::log(2.0 / delta);
    return std::sqrt(numerator / (2.0 * static_cast<double>(m)));
}

GapReport gap_audit(double r_test, double r_emp, double bound) {
    if (r_test < 0.0 || r_emp < 0.0) throw ConfigError("error rates must be nonnegative");
    if (bound < 0.0) throw ConfigError("bound must be nonnegative");
    GapReport rep;
    rep.r_test = r_test;
    rep.r_emp = r_emp;
    rep.bound = bound;
    rep.e_gen = r_test - r_emp;
    rep.pass = r_test <= r_emp + bound;
    return rep;
}

} // namespace pinnctl
