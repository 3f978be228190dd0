// Solves a tiny problem through the flat buffer interface used by language bindings.

#include <cstdio>

#include "supercut/flat_api.hpp"

int main() {
  // Two pairs of nodes; each pair agrees internally and disagrees with the other.
  const std::vector<double> positions{0, 0, 0, 0.1, 0, 0, 5, 0, 0, 5.1, 0, 0};
  const std::vector<double> scores{0.9, 0.1, 0.8, 0.2, 0.1, 0.9, 0.2, 0.8};
  const std::vector<std::int64_t> edges{0, 1, 1, 2, 2, 3};
  const std::vector<double> agreements{0.95, 0.02, 0.97};

  const auto r = supercut::flat::solve_gmp(positions, scores, 2, edges, agreements, 10.0, 0.05, 1e-4, 0);
  std::printf("energy %.6f\n", r.energy);
  for (std::size_t p = 0; p < r.component.size(); ++p)
    std::printf("node %zu -> component %lld\n", p, static_cast<long long>(r.component[p]));
}
