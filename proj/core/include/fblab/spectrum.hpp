#pragma once

#include <vector>

// Lowest eigenvalues of the Ornstein-Uhlenbeck operator
// L0 = -d^2/dx^2 + x d/dx on the half-line with a Dirichlet condition at 0,
// in the Gaussian-weighted inner product. The odd Hermite polynomials are
// eigenfunctions, so the exact low spectrum is 1, 3, 5, ...

namespace fblab {

struct SpectrumOptions {
  double truncation = 12.0;  // far-end Dirichlet wall
  int grid = 2000;           // subintervals on [0, truncation]
};

// Returns the k lowest eigenvalues (ascending). Throws ContractError for
// k > 5 or grid < 500, and a runtime error if the eigeniteration fails.
std::vector<double> ou_halfline_spectrum(int k, const SpectrumOptions& opts = {});

}  // namespace fblab
