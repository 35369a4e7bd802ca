#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace advtext {

enum class ErrorKind {
  kInvalidConfig,
  kShape,
  kNumericOverflow,
  kEmptyVocabulary,
  kInvalidId,
  kEmptySplit,
  kDegenerateEmbedding,
  kStaleIndex,
  kPairing,
  kEmptyInput,
  kInvalidCheckpoint,
  kUsage,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library carries a kind so callers (and
// tests) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace advtext
