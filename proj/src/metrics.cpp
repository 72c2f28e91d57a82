#include "geosurv/metrics.hpp"

namespace geosurv {

ComparablePairs comparable_pairs(std::span<const double> time, std::span<const char> event) {
  if (time.size() != event.size())
    throw std::invalid_argument("comparable_pairs: length mismatch");
  if (time.size() < 2) throw std::invalid_argument("comparable_pairs: need >= 2 subjects");

  const int n = static_cast<int>(time.size());
  ComparablePairs out;
  for (int i = 0; i < n; ++i) {
    if (!event[i]) continue;
    for (int j = 0; j < n; ++j) {
      if (time[i] < time[j]) out.pairs.emplace_back(i, j);
    }
  }
  out.num = static_cast<std::int64_t>(out.pairs.size());
  return out;
}

CIndexResult concordance_index(std::span<const double> time, std::span<const char> event,
                               std::span<const double> risk, TiePolicy policy) {
  if (time.size() != event.size() || time.size() != risk.size())
    throw std::invalid_argument("concordance_index: length mismatch");

  // Streaming over the same pair set as comparable_pairs without
  // materializing it.
  const int n = static_cast<int>(time.size());
  CIndexResult r;
  for (int i = 0; i < n; ++i) {
    if (!event[i]) continue;
    for (int j = 0; j < n; ++j) {
      if (!(time[i] < time[j])) continue;
      ++r.num;
      if (risk[i] > risk[j])
        ++r.concordant;
      else if (risk[i] == risk[j])
        ++r.tied_score;
      else
        ++r.discordant;
    }
  }
  if (r.num == 0)
    throw NoComparablePairsError("concordance_index: no comparable pairs");
  const double tied_credit = policy == TiePolicy::half ? 0.5 : 0.0;
  r.c = (static_cast<double>(r.concordant) + tied_credit * static_cast<double>(r.tied_score)) /
        static_cast<double>(r.num);
  return r;
}

}  // namespace geosurv
