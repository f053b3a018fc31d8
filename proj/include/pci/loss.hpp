#ifndef PCI_LOSS_HPP
#define PCI_LOSS_HPP

#include <algorithm>
#include <cmath>

namespace pci {

inline constexpr double kProbabilityClamp = 1e-7;

// Binary cross-entropy of one prediction. The probability is clamped to
// [1e-7, 1 - 1e-7] before the log. pos_weight scales the positive term.
template <typename Scalar>
Scalar bce_loss(Scalar p, Scalar y, Scalar pos_weight = Scalar(1)) {
  const Scalar lo = Scalar(kProbabilityClamp);
  const Scalar q = std::clamp(p, lo, Scalar(1) - lo);
  return -(pos_weight * y * std::log(q) + (Scalar(1) - y) * std::log(Scalar(1) - q));
}

// d bce / d logit for p = sigmoid(logit).
template <typename Scalar>
Scalar bce_logit_gradient(Scalar p, Scalar y, Scalar pos_weight = Scalar(1)) {
  return pos_weight * y * (p - Scalar(1)) + (Scalar(1) - y) * p;
}

}  // namespace pci

#endif  // PCI_LOSS_HPP
