#pragma once

#include <stdexcept>
#include <string>

namespace erclaims {

// Every failure surfaced by the library carries one of these kinds. The CLI
// prints the kind name verbatim, so names are part of the external contract.
enum class ErrorKind {
  kIo,
  kMissingColumn,
  kBadSeverity,
  kBadNumber,
  kNegativeBilled,
  kCostAboveBilled,
  kDuplicateId,
  kBadRow,
  kEmptyDataset,
  kTooFewClaims,
  kUnknownLevel,
  kDegenerateVariance,
  kInsufficientDF,
  kBadK,
  kUnassignedLevel,
  kDegenerateLabels,
  kConstantTruth,
  kEmptyCluster,
  kNoFeasibleK,
  kSingleGroup,
  kEmptyGroup,
  kZeroBilled,
  kUnreviewed,
  kEmptyTrain,
  kSchemaMismatch,
  kNoOOBRows,
  kMissingPredictions,
  kMissingTruth,
  kNoPositiveCA,
  kBadConfig,
  kBadModelFile,
  kInvalidArgument,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace erclaims
