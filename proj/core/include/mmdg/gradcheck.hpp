#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mmdg/tape.hpp"

namespace mmdg {

struct GradCheckResult {
    bool pass = false;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    std::string worst;  // "input 1 element 13" for the largest deviation

    std::string summary() const {
        std::ostringstream os;
        os << (pass ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_err << " tol=" << tolerance;
        if (!worst.empty()) os << " worst=" << worst;
        return os.str();
    }
};

/// Builds a scalar loss from leaf inputs. Must be pure: same inputs, same
/// loss, no state carried across calls (clone running stats inside if the
/// graph owns any).
using GradCheckFn = std::function<Var64(Tape64&, const std::vector<Var64>&)>;

/// Compares tape gradients against central finite differences, elementwise,
/// in float64. Failures are reported, never thrown.
inline GradCheckResult check_gradients(const GradCheckFn& fn, const std::vector<Tensor64>& inputs, double tolerance,
                                       double step = 1e-3) {
    GradCheckResult res;
    res.tolerance = tolerance;

    auto eval = [&](const std::vector<Tensor64>& xs) {
        Tape64 tape;
        std::vector<Var64> leaves;
        leaves.reserve(xs.size());
        for (const auto& x : xs) leaves.push_back(tape.leaf(x));
        return fn(tape, leaves).value().item();
    };

    // analytic gradients
    Tape64 tape;
    std::vector<Var64> leaves;
    leaves.reserve(inputs.size());
    for (const auto& x : inputs) leaves.push_back(tape.leaf(x));
    Var64 loss = fn(tape, leaves);
    tape.backward(loss);

    std::vector<Tensor64> work = inputs;
    for (size_t k = 0; k < inputs.size(); ++k) {
        const auto& analytic = leaves[k].grad();
        for (size_t e = 0; e < work[k].size(); ++e) {
            const double orig = work[k][e];
            work[k][e] = orig + step;
            const double fp = eval(work);
            work[k][e] = orig - step;
            const double fm = eval(work);
            work[k][e] = orig;
            const double fd = (fp - fm) / (2.0 * step);
            const double an = analytic[e];
            const double denom = std::max({std::abs(an), std::abs(fd), 1e-3});
            const double rel = std::abs(an - fd) / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                std::ostringstream os;
                os << "input " << k << " element " << e << " analytic=" << an << " fd=" << fd;
                res.worst = os.str();
            }
        }
    }
    res.pass = res.max_rel_err < tolerance;
    return res;
}

}  // namespace mmdg
