#pragma once
// Independent ladder-algebra engine: applies interaction Hamiltonians to Fock
// states symbolically (bosonic sqrt rules, fermionic anticommutation signs)
// with no shared machinery with the enumerator/trace path. Used as the
// ground-truth oracle in tests and for dense sector matrices.

#include <map>

#include "fockforge/model_spec.hpp"

namespace fockforge {

// Weighted superposition over canonical Fock states.
using StateAmplitudes = std::map<FockState, double>;

// Sign of a fermionic ladder operator at the given mode key: (-1)^(number of
// same-type particles in modes strictly preceding the key). +1 for bosons.
int ladder_sign(const FockState& state, int particle, const Momentum& momentum,
                const ParticleRegistry& registry);

// a_(particle, momentum): dropped terms (unoccupied mode) simply vanish.
StateAmplitudes apply_annihilation(const StateAmplitudes& in, int particle,
                                   const Momentum& momentum, const ModelSpec& model);

// a^dag_(particle, momentum): terms exceeding the occupancy cap, fermionic
// double occupancy, or the register count I vanish.
StateAmplitudes apply_creation(const StateAmplitudes& in, int particle,
                               const Momentum& momentum, const ModelSpec& model);

// H applied to |F>, summed over every interaction and every in-cutoff
// momentum-conserving leg assignment (pole-excluded assignments contribute 0).
StateAmplitudes bruteforce_row(const ModelSpec& model, const FockState& F);

// <F'|H|F> read off from bruteforce_row.
double matrix_element_bruteforce(const ModelSpec& model, const FockState& F,
                                 const FockState& F_prime);

}  // namespace fockforge
