// SPDX-License-Identifier: Apache-2.0
#include "adl/error.hpp"

namespace adl {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Protocol: return "protocol violation";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Comparison: return "comparison error";
  }
  return "unknown error";
}

}  // namespace adl
