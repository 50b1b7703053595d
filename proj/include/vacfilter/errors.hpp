#pragma once

#include <stdexcept>

namespace vacfilter {

// Thrown when a numerical procedure cannot produce a meaningful result
// (singular conditioning, zero-probability branches, failed brackets).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vacfilter
