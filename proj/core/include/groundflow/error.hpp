#ifndef GROUNDFLOW_ERROR_HPP
#define GROUNDFLOW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace groundflow
{
enum class ErrorKind {
  malformed_input,       // bad file contents, out-of-bounds pixels, bad polarity
  ordering,              // non-monotone timestamps
  contract,              // caller violated a precondition
  domain,                // argument outside the mathematical domain
  insufficient_data,     // too few or degenerate correspondences
  degenerate_consensus,  // RANSAC found too few inliers
  stale_imu,             // no IMU sample close enough in time
  evaluation,            // estimates and ground truth cannot be paired
  config,                // invalid or unknown configuration
};

const char * to_string(ErrorKind kind);

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string & what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace groundflow

#endif  // GROUNDFLOW_ERROR_HPP
