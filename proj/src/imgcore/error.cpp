#include "railvo/error.hpp"

namespace railvo {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Format: return "format error";
    case ErrorCode::EmptyWarp: return "empty warp";
    case ErrorCode::DegeneratePoint: return "degenerate point";
    case ErrorCode::InsufficientOverlap: return "insufficient overlap";
    case ErrorCode::NoTexture: return "no texture";
    case ErrorCode::NoEpipole: return "no epipole";
    case ErrorCode::InsufficientFlow: return "insufficient flow";
    case ErrorCode::DegenerateFlow: return "degenerate flow";
    case ErrorCode::AmbiguousPose: return "ambiguous pose";
    case ErrorCode::ParallelFlow: return "parallel flow";
    case ErrorCode::InvalidMeasurement: return "invalid measurement";
    case ErrorCode::IllConditionedTag: return "ill-conditioned tag";
    case ErrorCode::Monotonicity: return "monotonicity error";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Alignment: return "alignment error";
    case ErrorCode::EmptySeries: return "empty series";
    case ErrorCode::DatasetMismatch: return "dataset mismatch";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown error";
}

}  // namespace railvo
