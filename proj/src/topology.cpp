#include "nrs/topology.hpp"

#include <vector>

namespace nrs {

Topology build_topology(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols()) {
    throw NonSquareError("adjacency matrix must be square");
  }
  if (W.rows() < 2) {
    throw NonSquareError("adjacency matrix needs at least the target and one robot");
  }
  if ((W.array() < 0.0).any()) {
    throw NegativeWeightError("adjacency weights must be nonnegative");
  }
  if (W.diagonal().cwiseAbs().maxCoeff() != 0.0) {
    throw NonzeroDiagonalError("adjacency diagonal must be zero");
  }

  Topology t;
  t.n = static_cast<int>(W.rows()) - 1;
  t.W = W;
  t.zeta = W.block(1, 0, t.n, 1);
  t.What = W.block(1, 1, t.n, t.n);
  t.varpi = t.zeta + t.What.rowwise().sum();
  for (int i = 0; i < t.n; ++i) {
    if (t.varpi(i) <= 0.0) {
      throw IsolatedNodeError("robot " + std::to_string(i + 1) +
                              " has no in-edges (varpi = 0)");
    }
  }
  t.B = t.varpi.asDiagonal();
  t.D = t.varpi.cwiseInverse().asDiagonal() * t.What;
  return t;
}

bool has_spanning_tree(const Topology& t) {
  // BFS from node 0 following w_ij > 0 as an arc j -> i.
  std::vector<bool> reached(t.n + 1, false);
  std::vector<int> queue{0};
  reached[0] = true;
  while (!queue.empty()) {
    const int j = queue.back();
    queue.pop_back();
    for (int i = 1; i <= t.n; ++i) {
      if (!reached[i] && t.W(i, j) > 0.0) {
        reached[i] = true;
        queue.push_back(i);
      }
    }
  }
  for (int i = 1; i <= t.n; ++i) {
    if (!reached[i]) return false;
  }
  return true;
}

Eigen::VectorXcd spectrum_D(const Topology& t) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(t.D, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw EigenFailure("eigenvalue iteration on D did not converge");
  }
  return solver.eigenvalues();
}

}  // namespace nrs
