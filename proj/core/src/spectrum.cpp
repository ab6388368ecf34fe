#include "fblab/spectrum.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "fblab/types.hpp"

namespace fblab {

// Divergence form: L0 u = -(w u')' / w with w = exp(-x^2/2). The finite
// difference operator is symmetrized by the similarity transform with
// sqrt(w), giving a symmetric tridiagonal matrix with the same spectrum.
std::vector<double> ou_halfline_spectrum(int k, const SpectrumOptions& opts) {
  if (k < 1 || k > 5) throw ContractError("eigenvalue count must be between 1 and 5");
  if (opts.grid < 500) throw ContractError("eigensolver grid must have at least 500 nodes");
  if (!(opts.truncation > 1.0)) throw ContractError("truncation must exceed 1");

  const int N = opts.grid;        // subintervals; interior nodes 1..N-1
  const double R = opts.truncation;
  const double h = R / N;
  const int M = N - 1;

  const auto logw = [](double x) { return -0.5 * x * x; };

  Eigen::VectorXd diag(M), sub(M - 1);
  for (int i = 1; i <= M; ++i) {
    const double x = i * h;
    // Ratios of Gaussians evaluated via exp of log-differences to dodge
    // underflow near the far wall.
    const double wp = std::exp(logw(x + 0.5 * h) - logw(x));
    const double wm = std::exp(logw(x - 0.5 * h) - logw(x));
    diag(i - 1) = (wp + wm) / (h * h);
    if (i < M) {
      const double xr = (i + 1) * h;
      sub(i - 1) = -std::exp(logw(x + 0.5 * h) - 0.5 * (logw(x) + logw(xr))) / (h * h);
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigenvalue iteration did not converge");

  std::vector<double> out(k);
  for (int i = 0; i < k; ++i) out[i] = solver.eigenvalues()(i);
  return out;
}

}  // namespace fblab
