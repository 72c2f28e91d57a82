#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "geosurv/metrics.hpp"
#include "geosurv/rng.hpp"

using namespace geosurv;

namespace {

// Independent oracle: enumerate comparable pairs with a plain double loop
// and score them from the explicit pair list.
CIndexResult c_index_from_pair_list(const std::vector<double>& time,
                                    const std::vector<char>& event,
                                    const std::vector<double>& risk) {
  CIndexResult r;
  const int n = static_cast<int>(time.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!event[i] || !(time[i] < time[j])) continue;
      ++r.num;
      if (risk[i] > risk[j])
        ++r.concordant;
      else if (risk[i] == risk[j])
        ++r.tied_score;
      else
        ++r.discordant;
    }
  r.c = (r.concordant + 0.5 * r.tied_score) / static_cast<double>(r.num);
  return r;
}

}  // namespace

TEST_CASE("uncensored layout: every ordered pair is comparable") {
  const std::vector<double> time{3.0, 1.0, 4.0, 2.0};
  const std::vector<char> event{1, 1, 1, 1};
  const auto cp = comparable_pairs(time, event);
  CHECK(cp.num == 6);
}

TEST_CASE("censored layout keeps only pairs anchored at observed events") {
  // events observed at y1 < y3; y2, y4 censored with y1 < y2 < y3 < y4
  const std::vector<double> time{1.0, 2.0, 3.0, 4.0};
  const std::vector<char> event{1, 0, 1, 0};
  const auto cp = comparable_pairs(time, event);
  const std::set<std::pair<int, int>> expected{{0, 1}, {0, 2}, {0, 3}, {2, 3}};
  CHECK(cp.num == 4);
  CHECK(std::set<std::pair<int, int>>(cp.pairs.begin(), cp.pairs.end()) == expected);
}

TEST_CASE("all censored gives an empty pair set") {
  const std::vector<double> time{1.0, 2.0, 3.0};
  const std::vector<char> event{0, 0, 0};
  CHECK(comparable_pairs(time, event).num == 0);
  const std::vector<double> risk{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(concordance_index(time, event, risk), NoComparablePairsError);
}

TEST_CASE("tied event times produce no pair in either direction") {
  const std::vector<double> time{5.0, 5.0};
  const std::vector<char> event{1, 1};
  CHECK(comparable_pairs(time, event).num == 0);
}

TEST_CASE("perfect ranking and constant risk") {
  const std::vector<double> time{1.0, 2.0, 3.0};
  const std::vector<char> event{1, 1, 1};
  const std::vector<double> desc{3.0, 2.0, 1.0};
  CHECK(concordance_index(time, event, desc).c == 1.0);

  const std::vector<double> flat{1.0, 1.0, 1.0};
  const auto tied = concordance_index(time, event, flat);
  CHECK(tied.c == 0.5);
  CHECK(tied.tied_score == tied.num);

  // strict mode follows the literal indicator: ties earn nothing
  CHECK(concordance_index(time, event, flat, TiePolicy::strict).c == 0.0);
}

TEST_CASE("matches the pair-list oracle exactly on random fixtures") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_index(45));
    std::vector<double> time(n), risk(n);
    std::vector<char> event(n);
    for (int i = 0; i < n; ++i) {
      time[i] = std::round(rng.uniform(0.0, 20.0));  // force ties in time
      risk[i] = std::round(rng.uniform(0.0, 8.0));   // and in score
      event[i] = rng.bernoulli(0.6) ? 1 : 0;
    }
    const auto want = c_index_from_pair_list(time, event, risk);
    if (want.num == 0) continue;
    const auto got = concordance_index(time, event, risk);
    CHECK(got.c == want.c);
    CHECK(got.concordant == want.concordant);
    CHECK(got.tied_score == want.tied_score);
    CHECK(got.discordant == want.discordant);
    CHECK(got.num == want.num);
    CHECK(got.concordant + got.tied_score + got.discordant == got.num);
  }
}

TEST_CASE("antisymmetry and monotone invariance") {
  Rng rng(11);
  const int n = 40;
  std::vector<double> time(n), risk(n);
  std::vector<char> event(n);
  for (int i = 0; i < n; ++i) {
    time[i] = rng.uniform(0.0, 50.0);
    risk[i] = rng.uniform(0.0, 4.0);
    event[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  const auto base = concordance_index(time, event, risk);
  REQUIRE(base.tied_score == 0);

  std::vector<double> negated(risk);
  for (auto& v : negated) v = -v;
  CHECK(concordance_index(time, event, negated).c == doctest::Approx(1.0 - base.c).epsilon(1e-15));

  std::vector<double> transformed(risk);
  for (auto& v : transformed) v = std::exp(3.0 * v + 1.0);  // strictly increasing
  CHECK(concordance_index(time, event, transformed).c == base.c);
}

TEST_CASE("no censoring: num counts distinct-time pairs once") {
  Rng rng(5);
  const int n = 30;
  std::vector<double> time(n);
  std::vector<char> event(n, 1);
  for (int i = 0; i < n; ++i) time[i] = i + rng.uniform01() * 0.5;  // distinct
  const auto cp = comparable_pairs(time, event);
  CHECK(cp.num == n * (n - 1) / 2);
}
