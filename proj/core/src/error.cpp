#include "dos/error.hpp"

namespace dos {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::DegenerateVector: return "degenerate vector";
    case ErrorKind::InvalidK: return "invalid k";
    case ErrorKind::UndefinedIndex: return "undefined index";
    case ErrorKind::InvalidLabel: return "invalid label";
    case ErrorKind::InvalidRequest: return "invalid request";
    case ErrorKind::State: return "state error";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

}  // namespace dos
