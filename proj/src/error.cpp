#include "advtext/error.hpp"

namespace advtext {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig: return "invalid-config";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kNumericOverflow: return "numeric-overflow";
    case ErrorKind::kEmptyVocabulary: return "empty-vocabulary";
    case ErrorKind::kInvalidId: return "invalid-id";
    case ErrorKind::kEmptySplit: return "empty-split";
    case ErrorKind::kDegenerateEmbedding: return "degenerate-embedding";
    case ErrorKind::kStaleIndex: return "stale-index";
    case ErrorKind::kPairing: return "pairing";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kInvalidCheckpoint: return "invalid-checkpoint";
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace advtext
