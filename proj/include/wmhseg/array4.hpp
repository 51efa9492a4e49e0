#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmhseg {

/// (batch, channels, height, width); row-major inside each channel plane.
struct Shape4 {
    std::size_t n = 1;
    std::size_t c = 1;
    std::size_t h = 1;
    std::size_t w = 1;

    std::size_t count() const { return n * c * h * w; }
    std::size_t plane() const { return h * w; }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

class Array4 {
public:
    Array4() = default;
    explicit Array4(Shape4 shape, double fill = 0.0);
    Array4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : Array4(Shape4{n, c, h, w}, fill) {}
    Array4(Shape4 shape, std::vector<double> values);

    const Shape4& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t n, std::size_t c, std::size_t i, std::size_t j) {
        return data_[offset(n, c) + i * shape_.w + j];
    }
    double at(std::size_t n, std::size_t c, std::size_t i, std::size_t j) const {
        return data_[offset(n, c) + i * shape_.w + j];
    }

    std::size_t offset(std::size_t n, std::size_t c) const {
        return (n * shape_.c + c) * shape_.plane();
    }
    double* plane(std::size_t n, std::size_t c) { return data_.data() + offset(n, c); }
    const double* plane(std::size_t n, std::size_t c) const { return data_.data() + offset(n, c); }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void fill(double v);
    /// Elementwise this += other; shapes must match.
    void accumulate(const Array4& other);

    bool operator==(const Array4&) const = default;

private:
    Shape4 shape_{};
    std::vector<double> data_;
};

}  // namespace wmhseg
