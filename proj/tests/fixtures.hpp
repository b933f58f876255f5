#pragma once

#include <random>
#include <string>
#include <vector>

#include "cfdea/core.hpp"
#include "cfdea/miqp.hpp"

namespace cfdea::fixtures {

inline constexpr const char* kFourFirmsCsv =
    "id,in:x1,in:x2,out:y\n"
    "1,0.5,1,1\n"
    "2,1.5,0.5,1\n"
    "3,1.75,1.25,1\n"
    "4,2.5,1.25,1\n";

inline Panel four_firms() { return parse_panel_csv(kFourFirmsCsv).panel; }

// Random panel with inputs in [0.2, 3] and outputs in [0.5, 2].
inline Panel random_panel(std::mt19937_64& rng, std::size_t k, std::size_t ni, std::size_t no) {
  std::uniform_real_distribution<double> xin(0.2, 3.0);
  std::uniform_real_distribution<double> yout(0.5, 2.0);
  std::vector<std::string> ids;
  Matrix in(k, ni);
  Matrix out(k, no);
  for (std::size_t r = 0; r < k; ++r) {
    ids.push_back("u" + std::to_string(r));
    for (std::size_t c = 0; c < ni; ++c) in(r, c) = xin(rng);
    for (std::size_t c = 0; c < no; ++c) out(r, c) = yout(rng);
  }
  return Panel(ids, in, out);
}

// Mixed instance: continuous x in [0, 4] linked to binaries, random rows built
// around a feasible point, optional diagonal quadratic on x.
inline MiqpProblem random_miqp(std::mt19937_64& rng, bool quadratic) {
  std::uniform_int_distribution<int> nc_d(1, 5);
  std::uniform_int_distribution<int> nb_d(1, 12);
  std::uniform_int_distribution<int> m_d(1, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  const int nc = nc_d(rng);
  const int nb = nb_d(rng);
  MiqpProblem p;
  std::vector<double> point;
  for (int j = 0; j < nc; ++j) {
    const double q = quadratic && pos(rng) < 0.7 ? 0.1 + 2.0 * pos(rng) : 0.0;
    p.add_continuous(2.0 * u(rng), 0.0, 4.0, q);
    point.push_back(4.0 * pos(rng));
  }
  std::vector<int> bins;
  for (int b = 0; b < nb; ++b) {
    bins.push_back(p.add_binary(u(rng)));
    point.push_back(pos(rng) < 0.5 ? 0.0 : 1.0);
  }
  // x_j <= 4 z_b for a few links; the feasible point is adjusted to respect them.
  for (int j = 0; j < nc; ++j) {
    if (pos(rng) < 0.5) continue;
    const int b = static_cast<int>(pos(rng) * nb) % nb;
    point[nc + b] = 1.0;
    p.add_row({{j, 1.0}, {bins[b], -4.0}}, RowSense::kLessEqual, 0.0);
  }
  const int m = m_d(rng);
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> t;
    double act = 0.0;
    for (int j = 0; j < nc + nb; ++j) {
      if (pos(rng) < 0.3) continue;
      const double c = u(rng);
      t.push_back({j, c});
      act += c * point[j];
    }
    if (t.empty()) continue;
    if (pos(rng) < 0.5) p.add_row(t, RowSense::kLessEqual, act + 0.5 * pos(rng));
    else p.add_row(t, RowSense::kGreaterEqual, act - 0.5 * pos(rng));
  }
  return p;
}

}  // namespace cfdea::fixtures
