#pragma once
// The enumerator oracle at two levels: a semantic function computing
// (Psi'(F,i), a(F,i)) with a full trace, and a reversible register-level
// circuit with a log-local gate tally (built or counted analytically).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fockforge/model_spec.hpp"

namespace fockforge {

// ---------------------------------------------------------------------------
// Lookup table A(Q, i_low) -> ordered outgoing momentum tuple
// ---------------------------------------------------------------------------

struct LookupRow {
  Momentum Q;
  int i_low = 0;
  std::vector<Momentum> outgoing;  // one entry per outgoing leg, in leg order
};

struct LookupTable {
  std::vector<LookupRow> rows;  // sorted by (Q lexicographic, i_low)
  long long a = 1;              // max rows over Q, at least 1

  int rows_for(const Momentum& Q) const;
  const LookupRow* find(const Momentum& Q, int i_low) const;
  long long distinct_Q() const;
};

// Enumerates all in-cutoff canonical outgoing tuples per reachable Q.
// Canonical: within each group of identical-type legs, momenta non-increasing
// (strictly decreasing for fermionic types); per Q, rows ordered by
// lexicographically decreasing flattened tuple. The reachable Q set is the
// intersection of the outgoing-sum range, the incoming-sum range, and (LF,
// axis 1) the cap at K.
LookupTable build_lookup_table(const Interaction& interaction, const Cutoffs& cutoffs,
                               const ParticleRegistry& registry);

// ---------------------------------------------------------------------------
// Analytic per-interaction counts (cheap at any K; no table materialization)
// ---------------------------------------------------------------------------

struct InteractionCounts {
  long long n_J = 0;         // number of incoming-selector values
  long long a = 1;           // lookup rows maximized over Q (>= 1)
  long long n_rows = 0;      // total lookup rows
  long long n_distinct_Q = 0;
  long long index_space = 0;  // n_J * a
  // Canonical outgoing tuples over the whole momentum box (no sum
  // restriction): the size of the circuit's step-3 controlled-set sweep.
  long long n_box_tuples = 1;
};

InteractionCounts interaction_counts(const Interaction& interaction,
                                     const Cutoffs& cutoffs,
                                     const ParticleRegistry& registry);

long long index_space_size(const Interaction& interaction, const Cutoffs& cutoffs,
                           const ParticleRegistry& registry);

// ---------------------------------------------------------------------------
// Semantic oracle
// ---------------------------------------------------------------------------

struct EnumTrace {
  int interaction_index = -1;
  long long i = 0;
  long long i_high = 0;
  long long i_low = 0;
  std::vector<int> J;  // 1-based register choices, one per incoming leg
  std::vector<Momentum> incoming_momenta;
  Momentum Q;
  std::vector<Momentum> outgoing;       // A(Q, i_low)
  std::vector<int> emptied;             // E list (original register indices)
  std::vector<int> insertion_positions; // 1-based, 0 when merged into a mode
  std::vector<int> w_in;                // occupancy right before each annihilation
  std::vector<int> w_out;               // occupancy right after each creation
  std::vector<int> parity_in;           // same-type preceding counts at application
  std::vector<int> parity_out;
  int flag = 0;  // 0 = valid
  std::string flag_reason;
};

struct EnumResult {
  FockState f_prime;
  long long a_flag = 0;  // 0 = valid, i + 1 otherwise (one-based echo keeps
                         // the map injective even when index 0 is invalid)
  EnumTrace trace;
};

// Precomputed per-interaction oracle data.
struct InteractionOracle {
  Interaction interaction;
  LookupTable table;
  std::vector<std::vector<int>> j_values;  // incoming selectors in index order
  long long index_space = 0;
  long long offset = 0;
  std::vector<PolePredicate> poles;
};

struct ModelOracle {
  ModelSpec model;
  std::vector<InteractionOracle> blocks;
  long long index_space_size = 0;
};

ModelOracle build_oracle(const ModelSpec& model);

// Coefficient of one assignment, summed over every distinct rearrangement of
// the outgoing momenta within each same-type leg group (fermionic
// rearrangements signed by permutation parity, pole-excluded orientations
// skipped). Throws PoleError when every orientation is pole-excluded;
// requires d = 1 cutoffs.
double orientation_summed_coeff(const ModelSpec& model, const Interaction& interaction,
                                const std::vector<Momentum>& incoming_momenta,
                                const std::vector<Momentum>& outgoing);

// The oracle map (F, i) -> (F', a, trace). Duplicate transitions: for each
// (F, F') only the smallest raw-valid index is valid; larger ones are flagged.
EnumResult enumerate_semantic(const ModelOracle& oracle, const FockState& F,
                              long long i);

// Semantic results for every index 0..index_space_size-1 in one pass
// (duplicate flagging without the per-call rescan).
std::vector<EnumResult> enumerate_all(const ModelOracle& oracle, const FockState& F);

// All connected states, each produced once by its canonical (smallest valid)
// index; momentum is conserved for every output.
std::vector<EnumResult> connected_states(const ModelOracle& oracle, const FockState& F);

// ---------------------------------------------------------------------------
// Reversible log-local circuit
// ---------------------------------------------------------------------------

struct LinearTest {
  enum class Rel { eq, ne, lt, le, gt, ge };
  std::vector<std::pair<int, long long>> terms;  // (register id, coefficient)
  long long constant = 0;
  Rel rel = Rel::eq;
};

// Lexicographic mode-key compare: (label reg, mom regs...) < (const label,
// value-of mom regs...).
struct KeyLessTest {
  int lhs_label_reg = -1;
  std::vector<int> lhs_mom_regs;
  long long rhs_label = 0;
  std::vector<int> rhs_mom_regs;
};

struct Predicate {
  std::vector<LinearTest> tests;
  std::vector<KeyLessTest> key_tests;
};

// One log-local operation: a control predicate plus a list of primitive
// reversible effects applied atomically.
struct Effect {
  enum class Kind { xor_const, xor_reg, add_const, add_lin, swap } kind;
  int target = -1;
  long long value = 0;                           // xor_const / add_const
  int source = -1;                               // xor_reg / swap partner
  std::vector<std::pair<int, long long>> terms;  // add_lin
};

enum class OpCategory { compare, addsub, swap, copy, controlled_set, rotate_placeholder };
enum class StepTag { step1, step2, step3, step4, copyout };

struct Op {
  Predicate controls;
  std::vector<Effect> effects;
  OpCategory category = OpCategory::compare;
  StepTag step = StepTag::step1;
};

struct GateTally {
  long long step1 = 0, step2 = 0, step3 = 0, step4 = 0;
  long long uncompute = 0;  // copy-out section + mirrored inverse pass
  long long total = 0;
  std::map<OpCategory, long long> per_category;
};

struct LogLocalCircuit {
  std::vector<std::string> register_names;
  std::vector<Op> ops;  // forward + copy-out + uncompute, in execution order
  GateTally tally;

  // Register layout for interpreter init/readout.
  int I = 0;
  int dims = 0;
  std::vector<int> in_label, in_occ, out_label, out_occ, res_label, res_occ;
  std::vector<std::vector<int>> in_mom, out_mom, res_mom;  // [register][dim]
  int i_reg = -1, a_out = -1, flag = -1;
  int n_registers = 0;
  long long index_space_size = 0;
};

LogLocalCircuit circuit_build(const ModelOracle& oracle);

using RegisterSnapshot = std::vector<long long>;

RegisterSnapshot initial_snapshot(const LogLocalCircuit& circuit, const FockState& F,
                                  long long i);

// Runs ops [begin, end) on the snapshot in place.
void run_ops(const LogLocalCircuit& circuit, RegisterSnapshot& snap);
// Runs the declared inverse sequence (per-op inverses in reverse order).
void run_inverse(const LogLocalCircuit& circuit, RegisterSnapshot& snap);

struct CircuitResult {
  FockState f_in;
  FockState f_prime;
  long long a_flag = 0;
  bool ancillas_clean = false;
};

CircuitResult circuit_execute(const LogLocalCircuit& circuit, const FockState& F,
                              long long i);

// Analytic tally of circuit_build without materializing operations; the step
// buckets, uncompute, and total equal circuit_build(...).tally exactly
// (per_category is populated by circuit_build only).
GateTally gate_count(const ModelSpec& model, const Cutoffs& cutoffs);

}  // namespace fockforge
