#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace geosurv {

struct NoComparablePairsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered pairs (i, j) with event(i) observed and time(i) < time(j). The
// second element may be censored; ties in time never form a pair.
struct ComparablePairs {
  std::vector<std::pair<int, int>> pairs;
  std::int64_t num = 0;
};

ComparablePairs comparable_pairs(std::span<const double> time, std::span<const char> event);

// half: tied predicted scores count 0.5 (Harrell). strict: ties count 0.
enum class TiePolicy { half, strict };

struct CIndexResult {
  double c = 0.0;
  std::int64_t concordant = 0;
  std::int64_t tied_score = 0;
  std::int64_t discordant = 0;
  std::int64_t num = 0;
};

// Concordant when the earlier-event subject has the higher risk score.
CIndexResult concordance_index(std::span<const double> time, std::span<const char> event,
                               std::span<const double> risk,
                               TiePolicy policy = TiePolicy::half);

}  // namespace geosurv
