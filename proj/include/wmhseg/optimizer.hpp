#pragma once

#include <vector>

#include "wmhseg/parameter.hpp"

namespace wmhseg {

/// Heavy-ball SGD. Per parameter: v <- momentum * v + g; w <- w - lr * v;
/// then the gradient is cleared. Velocities start at zero and are matched to
/// parameters by position in the set.
class SgdMomentum {
public:
    SgdMomentum(double learning_rate, double momentum);

    void step(ParameterSet& params);

    double learning_rate() const { return lr_; }
    double momentum() const { return momentum_; }
    const std::vector<Array4>& velocity() const { return velocity_; }

private:
    double lr_;
    double momentum_;
    std::vector<Array4> velocity_;
};

}  // namespace wmhseg
