#pragma once
// Matrix elements from enumeration traces: per-assignment value
// sign * beta * sqrt(prod w' prod w), and the full entry <F'|H|F> summed over
// every ordered momentum-conserving leg assignment.

#include "fockforge/oracle_enumerator.hpp"

namespace fockforge {

// sqrt of the product of recorded occupancies (w right before each
// annihilation, w' right after each creation).
double occupation_factor(const EnumTrace& trace);

// (-1)^(sum of same-type-preceding counts over fermionic legs); +1 otherwise.
int fermion_parity(const ModelSpec& model, const Interaction& interaction,
                   const EnumTrace& trace);

// Value contributed by the single (canonical) assignment recorded in a valid
// trace: parity * beta * occupation_factor.
double trace_value(const ModelOracle& oracle, const EnumTrace& trace);

struct MatrixElement {
  double value = 0.0;
  long long n_assignments = 0;  // ordered assignments with nonzero coefficient
};

// <F'|H|F> summed over all interactions and ordered leg assignments.
// Annihilations apply in listed incoming-leg order, creations in listed
// outgoing-leg order; pole-excluded assignments contribute nothing.
MatrixElement matrix_element(const ModelSpec& model, const FockState& F,
                             const FockState& F_prime);

// |{F' : <F'|H|F> != 0}| (entries below 1e-15 count as zero).
long long exact_sparsity(const ModelOracle& oracle, const FockState& F);

}  // namespace fockforge
