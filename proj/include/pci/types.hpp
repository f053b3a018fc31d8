#ifndef PCI_TYPES_HPP
#define PCI_TYPES_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pci {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

// Violated precondition or malformed input. Maps to exit code 1 in the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written. Maps to exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pci

#endif  // PCI_TYPES_HPP
