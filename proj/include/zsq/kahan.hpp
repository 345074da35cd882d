#pragma once

namespace zsq {

// Kahan-Babuska (Neumaier) running sum; stays accurate when an addend is
// larger in magnitude than the running total.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double value) noexcept {
    const double t = sum_ + value;
    if ((sum_ >= 0 ? sum_ : -sum_) >= (value >= 0 ? value : -value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace zsq
