#pragma once

#include "urbandiff/conditioning.hpp"
#include "urbandiff/grid.hpp"

namespace urbandiff {

// Interface guided inference sees: a conditional noise estimate plus the
// vector-Jacobian product against the most recent estimate's input. The
// two-call protocol exists because the refinement cotangent depends on the
// prediction itself.
//
// Calls are stateful: input_grad(cot) differentiates the last predict() on
// this object. One in-flight prediction per instance; use one instance (or
// clone) per thread.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;

    virtual Grid predict(const Grid& xt, const ConditioningStack& cond, int t) = 0;

    // d <cotangent, eps_hat> / d xt for the preceding predict() call.
    virtual Grid input_grad(const Grid& cotangent) = 0;
};

}  // namespace urbandiff
