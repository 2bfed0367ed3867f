#pragma once
// Compact occupation-number encoding: ordered occupied-mode lists, validation,
// bit packing, and the qubit-count formulas for the compact and direct layouts.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fockforge {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};
struct EncodingError : Error {
  using Error::Error;
};
struct CapExceededError : Error {
  using Error::Error;
};

enum class Statistics { boson, fermion, antifermion };

std::string to_string(Statistics s);

struct ParticleType {
  std::string name;
  int species_id = 0;
  Statistics statistics = Statistics::boson;
  std::vector<int> extra_qnums;
};

// Label codes are indices into the registry; the registry is kept sorted
// species_id-major, extra_qnums-minor so that code order is the canonical
// label order used by the mode ordering below.
struct ParticleRegistry {
  std::vector<ParticleType> types;

  int size() const { return static_cast<int>(types.size()); }
  const ParticleType& at(int code) const;
  int find(const std::string& name) const;  // -1 if absent
  bool is_fermionic(int code) const;
  // Minimum label width able to distinguish all codes.
  int label_bits() const;
  void add(ParticleType t);  // keeps sorted order, rejects duplicates
};

using Momentum = std::vector<int>;

struct Mode {
  int particle = 0;  // label code
  Momentum momentum;
  int occupancy = 0;

  friend bool operator==(const Mode& a, const Mode& b) {
    return a.particle == b.particle && a.momentum == b.momentum &&
           a.occupancy == b.occupancy;
  }
};

// Canonical mode-key order: particle label code, then momentum lexicographic.
bool mode_key_less(const Mode& a, const Mode& b);

enum class Quantization { light_front, equal_time };

struct Cutoffs {
  std::vector<std::pair<int, int>> per_dim;  // (lambda_minus, lambda_plus)
  int occupancy_cap = 1;                     // W
  int register_count = 1;                    // I
  Quantization quantization = Quantization::light_front;

  int dims() const { return static_cast<int>(per_dim.size()); }
  // Light-front harmonic resolution K = lambda_plus on axis 1.
  int harmonic_resolution() const { return per_dim.at(0).second; }
  void check() const;  // throws Error on violated invariants
};

// Light-front 1+1D cutoffs at harmonic resolution K: momenta in [1, K],
// occupancies up to K, I = n_species * ceil(sqrt(2K)) mode registers
// (ceil(sqrt(2K)) is the per-species bound on distinct occupied modes).
Cutoffs light_front_cutoffs(int K, int n_species = 1);

// Equal-time 1+1D cutoffs: momenta in [-Lambda, Lambda], occupancy cap W,
// I mode registers.
Cutoffs equal_time_cutoffs(int Lambda, int I, int W);

struct FockState {
  std::vector<Mode> modes;  // strictly ordered by mode_key_less

  int mode_count() const { return static_cast<int>(modes.size()); }
  int total_particles() const;
  friend bool operator==(const FockState& a, const FockState& b) {
    return a.modes == b.modes;
  }
  friend bool operator<(const FockState& a, const FockState& b);
};

// Sorts modes into canonical order. Throws EncodingError on duplicate
// (particle, momentum) keys or zero occupancies. Idempotent.
FockState canonicalize(std::vector<Mode> modes);

// Reports every violated invariant; empty result means valid.
std::vector<std::string> validate(const FockState& state, const Cutoffs& cutoffs,
                                  const ParticleRegistry& registry);

// Component-wise sum of occupancy * momentum.
Momentum total_momentum(const FockState& state, int dims);

// Smallest b with 2^b >= x (x >= 1); ceil_log2(1) = 0.
int ceil_log2(long long x);

struct BitLayout {
  int bits_label = 0;
  int bits_occupancy = 0;           // concrete width ceil(log2(W+1)); 0 sentinel = empty
  int bits_occupancy_reported = 0;  // the asymptotic ceil(log2 W) figure
  std::vector<int> bits_momentum_per_dim;
  int bits_momentum = 0;
  int bits_per_mode = 0;           // concrete
  int bits_per_mode_reported = 0;  // using bits_occupancy_reported
  int bits_total = 0;              // register_count * bits_per_mode
  int bits_total_reported = 0;
  Cutoffs cutoffs;
};

BitLayout make_layout(const Cutoffs& cutoffs, int n_q);

// Total qubits of the compact encoding: I * (N_q + ceil(log2 W) +
// sum_j ceil(log2(range_j))).
long long qubits_total(const Cutoffs& cutoffs, int n_q);

// Total qubits of the direct (one register per mode) encoding:
// (#modes) * ceil(log2(occupancy cap)), #modes = q_values * prod_j range_j.
long long qubits_direct(const Cutoffs& cutoffs, int q_values);

// Generic bound floor(K / lambda_minus_1); requires lambda_minus_1 > 0.
int max_occupied_modes(const Cutoffs& cutoffs, int K);

// Tighter light-front d=1 bound ceil(sqrt(2K)).
int max_occupied_modes_lf_d1(int K);

// Bit packing. Momentum stored as offset n_j - lambda_minus_j; occupancy
// stored as w with 0 = unencoded register; unused trailing registers all-zero.
std::vector<std::uint8_t> encode(const FockState& state, const BitLayout& layout);
// Throws EncodingError on non-canonical bitstrings.
FockState decode(const std::vector<std::uint8_t>& bits, const BitLayout& layout);

std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> from_hex(const std::string& hex);

std::string to_string(const Mode& m, const ParticleRegistry& registry);
std::string to_string(const FockState& s, const ParticleRegistry& registry);

}  // namespace fockforge
