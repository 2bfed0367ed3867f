#pragma once
// Closed-form resource formulas: qubit comparisons, the connected-state
// sparsity bound, oracle query counts, and total log-local cost estimates.
// All asymptotic expressions are evaluated with unit constants and natural
// logarithms and are reported as estimates.

#include <array>
#include <map>
#include <optional>
#include <string>

#include "fockforge/model_spec.hpp"

namespace fockforge {

// Upper bound on the number of states connected to any F by one interaction
// with f legs, g of them outgoing: choose-with-replacement incoming factor
// C(I + f - g - 1, f - g) times the outgoing momentum-assignment factor
// prod_j max(range_j, 1)^(g-1) over the d momentum components.
long long sparsity_bound(int I, int f, int g, int d, const Cutoffs& cutoffs);

// Sum of per-interaction bounds for a whole model.
long long sparsity_bound(const ModelSpec& model);

// tau + ln(1/eps)/ln(ln(1/eps)), tau = k * H_max * t. Throws DomainError when
// eps >= 1 or when ln(ln(1/eps)) <= 0.
double query_count_static(long long k, double H_max, double t, double eps);

// tau * ln(tau/eps)/ln(ln(tau/eps)). Throws DomainError when the inner
// logarithm is not positive.
double query_count_timedep(double tau, double eps);

// Static query count times the per-query oracle cost factor I^h + Lambda^(d*g).
double total_log_local(double tau, double eps, int I, int h, int g, int d,
                       long long Lambda);

struct ResourceReport {
  std::string model_name;
  long long qubits_compact = 0;
  long long qubits_direct = 0;
  long long sparsity_bound_total = 0;
  std::optional<long long> k_exact;  // oracle index-space size when computed
  double tau = 0.0;
  double queries = 0.0;
  double total_log_local_ops = 0.0;
  bool time_dependent = false;
  // Echoed inputs.
  int I = 0, W = 0, d = 0;
  int f_max = 0, g_max = 0, h_max = 0;
  long long Lambda_range = 0;  // max over dims of (lambda_plus - lambda_minus)
  double t = 0.0, eps = 0.0, H_max = 0.0;
  // Per-interaction leg shapes (name -> (f, g, h)).
  std::map<std::string, std::array<int, 3>> legs_per_interaction;
};

// Evaluates the full report for a model: qubit comparison (label bits for the
// compact layout, one register per (species, momentum) mode for the direct
// layout), summed sparsity bound, index-space size as k, and the query/total
// formulas at (t, eps).
ResourceReport estimate_resources(const ModelSpec& model, double t, double eps,
                                  double H_max, bool time_dependent = false);

std::string to_string(const ResourceReport& report);

}  // namespace fockforge
