#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace strattree {

enum class DimKind { Continuous, Discrete };

struct DimensionSpec {
    DimKind kind = DimKind::Continuous;
    double lower = 0.0;
    double upper = 1.0;
    std::vector<double> support;  // discrete dimensions only
};

// Rectangular covariate space: a product of bounded per-dimension intervals.
class CovariateSpace {
public:
    CovariateSpace() = default;

    explicit CovariateSpace(std::vector<DimensionSpec> dims) : dims_(std::move(dims)) {
        for (std::size_t j = 0; j < dims_.size(); ++j) {
            const auto& d = dims_[j];
            if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
                throw std::invalid_argument("dimension " + std::to_string(j + 1) +
                                            ": bounds must be finite with lower < upper");
            }
            if (d.kind == DimKind::Discrete) {
                if (d.support.empty()) {
                    throw std::invalid_argument("dimension " + std::to_string(j + 1) +
                                                ": discrete dimension needs a nonempty support");
                }
                for (double s : d.support) {
                    if (s < d.lower || s > d.upper) {
                        throw std::invalid_argument("dimension " + std::to_string(j + 1) +
                                                    ": support point outside bounds");
                    }
                }
            }
        }
    }

    // d dimensions, all continuous on [lo, hi]
    static CovariateSpace unit_cube(std::size_t d, double lo = 0.0, double hi = 1.0) {
        std::vector<DimensionSpec> dims(d);
        for (auto& dim : dims) {
            dim.lower = lo;
            dim.upper = hi;
        }
        return CovariateSpace(std::move(dims));
    }

    std::size_t num_dims() const { return dims_.size(); }
    const DimensionSpec& dim(std::size_t j) const { return dims_[j]; }
    const std::vector<DimensionSpec>& dims() const { return dims_; }

    bool contains(std::span<const double> x) const {
        if (x.size() != dims_.size()) return false;
        for (std::size_t j = 0; j < dims_.size(); ++j) {
            if (x[j] < dims_[j].lower || x[j] > dims_[j].upper) return false;
        }
        return true;
    }

    // throws naming the first violating dimension (1-based, matching x1..xd)
    void require_inside(std::span<const double> x) const {
        if (x.size() != dims_.size()) {
            throw std::domain_error("covariate vector has " + std::to_string(x.size()) +
                                    " entries, space has " + std::to_string(dims_.size()));
        }
        for (std::size_t j = 0; j < dims_.size(); ++j) {
            if (x[j] < dims_[j].lower || x[j] > dims_[j].upper) {
                throw std::domain_error("covariate x" + std::to_string(j + 1) + " = " +
                                        std::to_string(x[j]) + " outside [" +
                                        std::to_string(dims_[j].lower) + ", " +
                                        std::to_string(dims_[j].upper) + "]");
            }
        }
    }

    friend bool operator==(const CovariateSpace& a, const CovariateSpace& b) {
        if (a.dims_.size() != b.dims_.size()) return false;
        for (std::size_t j = 0; j < a.dims_.size(); ++j) {
            if (a.dims_[j].kind != b.dims_[j].kind || a.dims_[j].lower != b.dims_[j].lower ||
                a.dims_[j].upper != b.dims_[j].upper || a.dims_[j].support != b.dims_[j].support) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<DimensionSpec> dims_;
};

}  // namespace strattree
