#pragma once
// Dense-sector reference machinery: sector basis enumeration, dense
// Hamiltonians from the ladder-algebra engine, and a verification of the
// szegedy-style walk step built from the enumerator oracle.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fockforge/oracle_enumerator.hpp"

namespace fockforge {

// All valid states of the model's cutoff sector, sorted canonically.
// Light front: total axis-1 momentum equals the harmonic resolution K
// (required_total, when given, overrides it). Equal time: the full box, or
// the fixed-total slice when required_total is given. Throws CapExceededError
// when the state count exceeds FOCKFORGE_SECTOR_CAP (default 20000).
std::vector<FockState> enumerate_sector(const ModelSpec& model,
                                        std::optional<int> required_total = std::nullopt);

// H over the sector basis, columns via the ladder-algebra engine.
Eigen::MatrixXd build_dense(const ModelSpec& model, const std::vector<FockState>& basis);

double one_norm(const Eigen::MatrixXd& H);  // max column absolute sum
double max_norm(const Eigen::MatrixXd& H);  // max absolute entry

// r = min(1, ||H||_1 / (k * ||H||_max)), k the oracle index-space size.
double choose_r(const Eigen::MatrixXd& H, long long k);

struct WalkCheck {
  long long k = 0;          // index-space size
  long long basis_size = 0;
  double h_one_norm = 0.0;
  double h_max_norm = 0.0;
  double r = 0.0;
  double max_unitarity_dev = 0.0;  // max |<phi_F|phi_F> - 1| (T isometry check)
  double max_overlap_dev = 0.0;    // max |<F'',phi''|S|F,phi> - r H(F'',F)/||H||_1|
};

// Builds the walk vectors phi_F from the enumerator oracle branch by branch
// (valid branch sqrt(r H/||H||_1), residual branch sqrt(1/k - ...) with the
// flag set) and checks them against the dense Hamiltonian. The reflection S
// swaps the state registers and the flag against a fresh zero ancilla.
// Requires a Hamiltonian with nonnegative matrix elements.
WalkCheck verify_walk(const ModelSpec& model,
                      std::optional<int> required_total = std::nullopt);

}  // namespace fockforge
