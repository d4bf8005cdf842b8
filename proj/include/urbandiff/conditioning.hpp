#pragma once

#include "urbandiff/grid.hpp"

namespace urbandiff {

// Static conditioning layers C, co-registered with the LST grid.
// built_up is a fraction in [0, 1] and is fed to the model raw; elevation is
// expected in normalized (z-score) units by the time it reaches the model.
struct ConditioningStack {
    Grid built_up;
    Grid elevation;

    void validate() const {
        require_same_shape(built_up, elevation, "conditioning stack");
        if (!all_finite(built_up) || !all_finite(elevation))
            throw ParameterError("conditioning layers must be finite");
        for (float v : built_up)
            if (v < 0.0f || v > 1.0f)
                throw ParameterError("built_up values must lie in [0, 1]");
    }
};

}  // namespace urbandiff
