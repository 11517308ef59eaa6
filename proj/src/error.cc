#include "erclaims/error.h"

namespace erclaims {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kMissingColumn: return "MissingColumn";
    case ErrorKind::kBadSeverity: return "BadSeverity";
    case ErrorKind::kBadNumber: return "BadNumber";
    case ErrorKind::kNegativeBilled: return "NegativeBilled";
    case ErrorKind::kCostAboveBilled: return "CostAboveBilled";
    case ErrorKind::kDuplicateId: return "DuplicateId";
    case ErrorKind::kBadRow: return "BadRow";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kTooFewClaims: return "TooFewClaims";
    case ErrorKind::kUnknownLevel: return "UnknownLevel";
    case ErrorKind::kDegenerateVariance: return "DegenerateVariance";
    case ErrorKind::kInsufficientDF: return "InsufficientDF";
    case ErrorKind::kBadK: return "BadK";
    case ErrorKind::kUnassignedLevel: return "UnassignedLevel";
    case ErrorKind::kDegenerateLabels: return "DegenerateLabels";
    case ErrorKind::kConstantTruth: return "ConstantTruth";
    case ErrorKind::kEmptyCluster: return "EmptyCluster";
    case ErrorKind::kNoFeasibleK: return "NoFeasibleK";
    case ErrorKind::kSingleGroup: return "SingleGroup";
    case ErrorKind::kEmptyGroup: return "EmptyGroup";
    case ErrorKind::kZeroBilled: return "ZeroBilled";
    case ErrorKind::kUnreviewed: return "Unreviewed";
    case ErrorKind::kEmptyTrain: return "EmptyTrain";
    case ErrorKind::kSchemaMismatch: return "SchemaMismatch";
    case ErrorKind::kNoOOBRows: return "NoOOBRows";
    case ErrorKind::kMissingPredictions: return "MissingPredictions";
    case ErrorKind::kMissingTruth: return "MissingTruth";
    case ErrorKind::kNoPositiveCA: return "NoPositiveCA";
    case ErrorKind::kBadConfig: return "BadConfig";
    case ErrorKind::kBadModelFile: return "BadModelFile";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace erclaims
