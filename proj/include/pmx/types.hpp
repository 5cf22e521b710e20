#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace pmx {

// Response positions, always in this fixed order.
enum Position : int { Pos1A = 0, Pos1B = 1, Pos2A = 2, Pos2B = 3 };
inline constexpr int kNumPositions = 4;
inline constexpr std::array<const char*, 4> kPositionNames = {"1A", "1B", "2A", "2B"};

// Treatment sequence: Seq1 = AB, Seq2 = BA.
enum class SequenceId : int { Seq1 = 0, Seq2 = 1 };
inline constexpr int kNumSequences = 2;

inline int seq_index(SequenceId s) { return static_cast<int>(s); }

using GroupLabel = std::string;

struct PmxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoObservations : PmxError {
  NoObservations() : PmxError("record has no observed positions") {}
};

struct EmptySequence : PmxError {
  explicit EmptySequence(int s)
      : PmxError("no pairs observed in sequence " + std::to_string(s + 1)) {}
};

struct SingularSubcovariance : PmxError {
  using PmxError::PmxError;
};

struct InvalidScenario : PmxError {
  using PmxError::PmxError;
};

struct DegenerateVariance : PmxError {
  using PmxError::PmxError;
};

// One pair's quadrivariate response; std::nullopt marks a missing position.
struct PairRecord {
  std::string pair_id;
  SequenceId sequence = SequenceId::Seq1;
  std::array<std::optional<double>, 4> y;

  bool observed(int pos) const { return y[pos].has_value(); }
  int num_observed() const {
    int r = 0;
    for (const auto& v : y) r += v.has_value() ? 1 : 0;
    return r;
  }
};

}  // namespace pmx
