#pragma once

#include <stdexcept>

namespace rwre {

// Malformed input: unreadable files, schema violations, bad arguments,
// violated preconditions. Maps to CLI exit code 1.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact-propagation horizon above the configured cap. Maps to CLI exit
// code 2: the request is well-formed but refused.
struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rwre
