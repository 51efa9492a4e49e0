#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmhseg/array4.hpp"

namespace wmhseg {

/// A trainable tensor. value and grad always share a shape.
struct Parameter {
    std::string id;
    Array4 value;
    Array4 grad;

    Parameter(std::string name, Shape4 shape) : id(std::move(name)), value(shape), grad(shape) {}

    void zero_grad() { grad.fill(0.0); }
};

/// Ordered, name-unique collection of parameters. Elements keep their address
/// for the lifetime of the set once construction is finished.
class ParameterSet {
public:
    Parameter& add(std::string id, Shape4 shape);

    std::size_t size() const { return params_.size(); }
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    Parameter* find(const std::string& id);
    const Parameter* find(const std::string& id) const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    std::size_t scalar_count() const;
    void zero_grad();

private:
    std::vector<Parameter> params_;
};

}  // namespace wmhseg
