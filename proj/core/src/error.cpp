#include "groundflow/error.hpp"

namespace groundflow
{
const char * to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::malformed_input:
      return "malformed input";
    case ErrorKind::ordering:
      return "ordering";
    case ErrorKind::contract:
      return "contract";
    case ErrorKind::domain:
      return "domain";
    case ErrorKind::insufficient_data:
      return "insufficient data";
    case ErrorKind::degenerate_consensus:
      return "degenerate consensus";
    case ErrorKind::stale_imu:
      return "stale imu";
    case ErrorKind::evaluation:
      return "evaluation";
    case ErrorKind::config:
      return "config";
  }
  return "unknown";
}

}  // namespace groundflow
