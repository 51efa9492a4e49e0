#include "wmhseg/parameter.hpp"

#include <stdexcept>

namespace wmhseg {

Parameter& ParameterSet::add(std::string id, Shape4 shape) {
    if (find(id) != nullptr) {
        throw std::invalid_argument("duplicate parameter id " + id);
    }
    params_.emplace_back(std::move(id), shape);
    return params_.back();
}

Parameter* ParameterSet::find(const std::string& id) {
    for (auto& p : params_) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

const Parameter* ParameterSet::find(const std::string& id) const {
    for (const auto& p : params_) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace wmhseg
