#pragma once

#include <stdexcept>

namespace esnmpc {

/// Raised for every contract violation and numerical failure in the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace esnmpc
