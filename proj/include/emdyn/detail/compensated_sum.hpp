#pragma once

#include <cmath>

namespace emdyn::detail {

// Neumaier summation. Keeps likelihood-scale sums accurate to a few ulps
// so identities between independently computed terms hold tightly.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            carry_ += (sum_ - t) + x;
        } else {
            carry_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

}  // namespace emdyn::detail
