#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace payflow {

/// Logical clock unit. Nothing in the simulator reads wall-clock time.
using Tick = std::uint64_t;

using Bytes = std::vector<std::uint8_t>;

/// Base class for caller errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace payflow
