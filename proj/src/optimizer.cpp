#include "wmhseg/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace wmhseg {

SgdMomentum::SgdMomentum(double learning_rate, double momentum)
    : lr_(learning_rate), momentum_(momentum) {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("momentum must lie in [0, 1)");
    }
}

void SgdMomentum::step(ParameterSet& params) {
    if (velocity_.empty()) {
        velocity_.reserve(params.size());
        for (const Parameter& p : params) velocity_.emplace_back(p.value.shape());
    }
    if (velocity_.size() != params.size()) {
        throw std::invalid_argument("optimizer state does not match parameter set");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = params[k];
        Array4& v = velocity_[k];
        if (!(v.shape() == p.value.shape())) {
            throw std::invalid_argument("optimizer state shape mismatch for " + p.id);
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = momentum_ * v[i] + p.grad[i];
            p.value[i] -= lr_ * v[i];
        }
        p.zero_grad();
    }
}

}  // namespace wmhseg
