#ifndef VCNN_ERROR_HPP
#define VCNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace vcnn {

enum class ErrorKind {
  // geometry
  UnboundedRegion,
  DimensionTooHigh,
  DimensionMismatch,
  EmptyPolytope,
  InvalidHalfspace,
  // partitions
  DuplicateSites,
  SiteOutsideDomain,
  PointOutsideDomain,
  // network / raster
  ShapeMismatch,
  PartitionMismatch,
  MissingCouplingTensor,
  UnknownActivation,
  DomainMismatch,
  DimensionUnsupported,
  // io
  BadFile,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::UnboundedRegion: return "UnboundedRegion";
    case ErrorKind::DimensionTooHigh: return "DimensionTooHigh";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyPolytope: return "EmptyPolytope";
    case ErrorKind::InvalidHalfspace: return "InvalidHalfspace";
    case ErrorKind::DuplicateSites: return "DuplicateSites";
    case ErrorKind::SiteOutsideDomain: return "SiteOutsideDomain";
    case ErrorKind::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::PartitionMismatch: return "PartitionMismatch";
    case ErrorKind::MissingCouplingTensor: return "MissingCouplingTensor";
    case ErrorKind::UnknownActivation: return "UnknownActivation";
    case ErrorKind::DomainMismatch: return "DomainMismatch";
    case ErrorKind::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorKind::BadFile: return "BadFile";
  }
  return "Unknown";
}

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(error_kind_name(kind)) + ": " + message);
}

}  // namespace vcnn

#endif  // VCNN_ERROR_HPP
