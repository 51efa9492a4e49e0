#include "wmhseg/array4.hpp"

#include <algorithm>

namespace wmhseg {

std::string Shape4::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
}

namespace {

void check_shape(const Shape4& s) {
    if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
        throw std::invalid_argument("Array4 shape components must be >= 1, got " + s.str());
    }
}

}  // namespace

Array4::Array4(Shape4 shape, double fill) : shape_(shape) {
    check_shape(shape_);
    data_.assign(shape_.count(), fill);
}

Array4::Array4(Shape4 shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
    check_shape(shape_);
    if (data_.size() != shape_.count()) {
        throw std::invalid_argument("Array4 storage length does not match shape " + shape_.str());
    }
}

void Array4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Array4::accumulate(const Array4& other) {
    if (other.shape_ != shape_) {
        throw std::invalid_argument("Array4::accumulate shape mismatch " + shape_.str() + " vs " +
                                    other.shape_.str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

}  // namespace wmhseg
