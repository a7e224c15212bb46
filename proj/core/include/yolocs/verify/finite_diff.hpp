#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace yolocs::verify {

// Central finite differences in double precision. Step scales with parameter
// magnitude; relative error clamps its denominator so gradients near zero are
// judged on absolute error.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t checked = 0;

    bool pass(double tol = 1e-4) const { return checked > 0 && max_rel_err <= tol; }
};

inline double fd_step(double theta) { return 1e-5 * std::max(1.0, std::abs(theta)); }

// denominator floor of 1e-3 makes the check an absolute one (tol * 1e-3) for
// gradients near zero, where central differences are dominated by roundoff
inline double rel_err(double analytic, double numeric) {
    const double denom = std::max(1e-3, std::max(std::abs(analytic), std::abs(numeric)));
    return std::abs(analytic - numeric) / denom;
}

// One scalar slot: perturbs *value in place, re-evaluating f.
inline double central_diff(const std::function<double()>& f, double* value) {
    const double orig = *value;
    const double h = fd_step(orig);
    *value = orig + h;
    const double fp = f();
    *value = orig - h;
    const double fm = f();
    *value = orig;
    return (fp - fm) / (2.0 * h);
}

// Checks a batch of parameters against analytic gradients. analytic(i) must
// return d f / d theta_i at the unperturbed point.
struct GradCheck {
    GradCheckResult result;

    void check_one(const std::string& name, const std::function<double()>& f, double* value,
                   double analytic) {
        const double numeric = central_diff(f, value);
        const double e = rel_err(analytic, numeric);
        if (e > result.max_rel_err) {
            result.max_rel_err = e;
            result.worst_param = name;
        }
        ++result.checked;
    }
};

}  // namespace yolocs::verify
