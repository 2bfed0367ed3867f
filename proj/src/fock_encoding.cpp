#include "fockforge/fock_encoding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fockforge {

std::string to_string(Statistics s) {
  switch (s) {
    case Statistics::boson: return "boson";
    case Statistics::fermion: return "fermion";
    case Statistics::antifermion: return "antifermion";
  }
  return "?";
}

const ParticleType& ParticleRegistry::at(int code) const {
  if (code < 0 || code >= size()) throw Error("particle code out of range");
  return types[static_cast<std::size_t>(code)];
}

int ParticleRegistry::find(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (types[static_cast<std::size_t>(i)].name == name) return i;
  return -1;
}

bool ParticleRegistry::is_fermionic(int code) const {
  return at(code).statistics != Statistics::boson;
}

int ParticleRegistry::label_bits() const {
  return ceil_log2(std::max(1, size()));
}

void ParticleRegistry::add(ParticleType t) {
  for (const auto& u : types) {
    if (u.name == t.name) throw Error("duplicate particle name: " + t.name);
    if (u.species_id == t.species_id && u.extra_qnums == t.extra_qnums)
      throw Error("duplicate particle label (species_id, qnums): " + t.name);
  }
  auto pos = std::lower_bound(
      types.begin(), types.end(), t, [](const ParticleType& a, const ParticleType& b) {
        return std::tie(a.species_id, a.extra_qnums) < std::tie(b.species_id, b.extra_qnums);
      });
  types.insert(pos, std::move(t));
}

bool mode_key_less(const Mode& a, const Mode& b) {
  return std::tie(a.particle, a.momentum) < std::tie(b.particle, b.momentum);
}

void Cutoffs::check() const {
  if (per_dim.empty()) throw Error("cutoffs: need at least one dimension");
  for (const auto& [lo, hi] : per_dim)
    if (lo > hi) throw Error("cutoffs: lambda_minus > lambda_plus");
  if (occupancy_cap < 1) throw Error("cutoffs: occupancy cap must be >= 1");
  if (register_count < 1) throw Error("cutoffs: register count must be >= 1");
  if (quantization == Quantization::light_front) {
    if (per_dim[0].first < 1)
      throw Error("cutoffs: light-front requires lambda_minus_1 >= 1");
  }
}

Cutoffs light_front_cutoffs(int K, int n_species) {
  if (K < 1) throw Error("light_front_cutoffs: K must be >= 1");
  if (n_species < 1) throw Error("light_front_cutoffs: n_species must be >= 1");
  Cutoffs c;
  c.per_dim = {{1, K}};
  c.occupancy_cap = K;
  // With s species, m occupied modes need total momentum at least
  // s*(1 + 2 + ... + m/s) ~ m^2/(2s), so m <= ceil(sqrt(2sK)); reduces to the
  // single-species ceil(sqrt(2K)) bound.
  c.register_count = static_cast<int>(std::ceil(std::sqrt(2.0 * n_species * K)));
  c.quantization = Quantization::light_front;
  return c;
}

Cutoffs equal_time_cutoffs(int Lambda, int I, int W) {
  if (Lambda < 0) throw Error("equal_time_cutoffs: Lambda must be >= 0");
  Cutoffs c;
  c.per_dim = {{-Lambda, Lambda}};
  c.occupancy_cap = W;
  c.register_count = I;
  c.quantization = Quantization::equal_time;
  c.check();
  return c;
}

int FockState::total_particles() const {
  int n = 0;
  for (const auto& m : modes) n += m.occupancy;
  return n;
}

bool operator<(const FockState& a, const FockState& b) {
  auto key = [](const Mode& m) { return std::make_tuple(m.particle, m.momentum, m.occupancy); };
  return std::lexicographical_compare(
      a.modes.begin(), a.modes.end(), b.modes.begin(), b.modes.end(),
      [&](const Mode& x, const Mode& y) { return key(x) < key(y); });
}

FockState canonicalize(std::vector<Mode> modes) {
  for (const auto& m : modes)
    if (m.occupancy < 1) throw EncodingError("canonicalize: zero-occupancy mode");
  std::sort(modes.begin(), modes.end(), mode_key_less);
  for (std::size_t i = 1; i < modes.size(); ++i)
    if (!mode_key_less(modes[i - 1], modes[i]))
      throw EncodingError("canonicalize: duplicate (particle, momentum) mode");
  return FockState{std::move(modes)};
}

std::vector<std::string> validate(const FockState& state, const Cutoffs& cutoffs,
                                  const ParticleRegistry& registry) {
  std::vector<std::string> out;
  const int d = cutoffs.dims();
  for (std::size_t i = 0; i < state.modes.size(); ++i) {
    const Mode& m = state.modes[i];
    if (m.particle < 0 || m.particle >= registry.size()) {
      out.push_back("unknown particle code");
      continue;
    }
    if (static_cast<int>(m.momentum.size()) != d)
      out.push_back("momentum dimension mismatch");
    for (int j = 0; j < d && j < static_cast<int>(m.momentum.size()); ++j)
      if (m.momentum[static_cast<std::size_t>(j)] < cutoffs.per_dim[static_cast<std::size_t>(j)].first ||
          m.momentum[static_cast<std::size_t>(j)] > cutoffs.per_dim[static_cast<std::size_t>(j)].second)
        out.push_back("momentum outside cutoffs");
    if (m.occupancy < 1) out.push_back("zero occupancy");
    if (m.occupancy > cutoffs.occupancy_cap) out.push_back("occupancy cap exceeded");
    if (registry.is_fermionic(m.particle) && m.occupancy > 1)
      out.push_back("fermionic occupancy exceeds 1");
    if (i > 0 && !mode_key_less(state.modes[i - 1], m))
      out.push_back("modes not strictly ordered");
  }
  if (state.mode_count() > cutoffs.register_count)
    out.push_back("more occupied modes than mode registers");
  return out;
}

Momentum total_momentum(const FockState& state, int dims) {
  Momentum p(static_cast<std::size_t>(dims), 0);
  for (const auto& m : state.modes)
    for (int j = 0; j < dims; ++j)
      p[static_cast<std::size_t>(j)] += m.occupancy * m.momentum.at(static_cast<std::size_t>(j));
  return p;
}

int ceil_log2(long long x) {
  if (x < 1) throw Error("ceil_log2: argument must be >= 1");
  int b = 0;
  long long v = 1;
  while (v < x) {
    v <<= 1;
    ++b;
  }
  return b;
}

BitLayout make_layout(const Cutoffs& cutoffs, int n_q) {
  cutoffs.check();
  if (n_q < 0) throw Error("make_layout: negative label width");
  BitLayout layout;
  layout.cutoffs = cutoffs;
  layout.bits_label = n_q;
  layout.bits_occupancy = ceil_log2(static_cast<long long>(cutoffs.occupancy_cap) + 1);
  layout.bits_occupancy_reported = ceil_log2(std::max(1, cutoffs.occupancy_cap));
  layout.bits_momentum = 0;
  for (const auto& [lo, hi] : cutoffs.per_dim) {
    int w = ceil_log2(static_cast<long long>(hi) - lo + 1);
    layout.bits_momentum_per_dim.push_back(w);
    layout.bits_momentum += w;
  }
  layout.bits_per_mode = layout.bits_label + layout.bits_momentum + layout.bits_occupancy;
  layout.bits_per_mode_reported =
      layout.bits_label + layout.bits_momentum + layout.bits_occupancy_reported;
  layout.bits_total = cutoffs.register_count * layout.bits_per_mode;
  layout.bits_total_reported = cutoffs.register_count * layout.bits_per_mode_reported;
  return layout;
}

long long qubits_total(const Cutoffs& cutoffs, int n_q) {
  return make_layout(cutoffs, n_q).bits_total_reported;
}

long long qubits_direct(const Cutoffs& cutoffs, int q_values) {
  cutoffs.check();
  long long n_modes = q_values;
  for (const auto& [lo, hi] : cutoffs.per_dim)
    n_modes *= static_cast<long long>(hi) - lo + 1;
  return n_modes * ceil_log2(std::max(1, cutoffs.occupancy_cap));
}

int max_occupied_modes(const Cutoffs& cutoffs, int K) {
  const int lambda_minus_1 = cutoffs.per_dim.at(0).first;
  if (lambda_minus_1 <= 0)
    throw Error("max_occupied_modes: no monotonic axis (lambda_minus_1 <= 0)");
  return K / lambda_minus_1;
}

int max_occupied_modes_lf_d1(int K) {
  if (K < 1) throw Error("max_occupied_modes_lf_d1: K must be >= 1");
  return static_cast<int>(std::ceil(std::sqrt(2.0 * K) - 1e-12));
}

namespace {

class BitWriter {
 public:
  explicit BitWriter(int total_bits)
      : bytes_(static_cast<std::size_t>((total_bits + 7) / 8), 0) {}
  void put(long long value, int width) {
    for (int b = 0; b < width; ++b) {
      if ((value >> b) & 1)
        bytes_[static_cast<std::size_t>(pos_ / 8)] |=
            static_cast<std::uint8_t>(1u << (pos_ % 8));
      ++pos_;
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  int pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  long long get(int width) {
    long long v = 0;
    for (int b = 0; b < width; ++b) {
      const std::size_t byte = static_cast<std::size_t>(pos_ / 8);
      if (byte < bytes_.size() && (bytes_[byte] >> (pos_ % 8)) & 1) v |= 1LL << b;
      ++pos_;
    }
    return v;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  int pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const FockState& state, const BitLayout& layout) {
  const Cutoffs& c = layout.cutoffs;
  if (state.mode_count() > c.register_count)
    throw EncodingError("encode: more modes than registers");
  BitWriter w(layout.bits_total);
  for (int r = 0; r < c.register_count; ++r) {
    if (r < state.mode_count()) {
      const Mode& m = state.modes[static_cast<std::size_t>(r)];
      if (layout.bits_label < ceil_log2(std::max<long long>(1, m.particle + 1)))
        throw EncodingError("encode: particle code exceeds label width");
      w.put(m.particle, layout.bits_label);
      for (int j = 0; j < c.dims(); ++j) {
        const long long off = m.momentum.at(static_cast<std::size_t>(j)) -
                              c.per_dim[static_cast<std::size_t>(j)].first;
        if (off < 0 || off > c.per_dim[static_cast<std::size_t>(j)].second -
                                 c.per_dim[static_cast<std::size_t>(j)].first)
          throw EncodingError("encode: momentum outside cutoffs");
        w.put(off, layout.bits_momentum_per_dim[static_cast<std::size_t>(j)]);
      }
      if (m.occupancy < 1 || m.occupancy > c.occupancy_cap)
        throw EncodingError("encode: occupancy outside [1, W]");
      w.put(m.occupancy, layout.bits_occupancy);
    } else {
      w.put(0, layout.bits_per_mode);
    }
  }
  return w.take();
}

FockState decode(const std::vector<std::uint8_t>& bits, const BitLayout& layout) {
  const Cutoffs& c = layout.cutoffs;
  if (static_cast<int>(bits.size()) != (layout.bits_total + 7) / 8)
    throw EncodingError("decode: bitstring length mismatch");
  BitReader rd(bits);
  std::vector<Mode> modes;
  bool seen_empty = false;
  for (int r = 0; r < c.register_count; ++r) {
    Mode m;
    m.particle = static_cast<int>(rd.get(layout.bits_label));
    for (int j = 0; j < c.dims(); ++j) {
      const long long off = rd.get(layout.bits_momentum_per_dim[static_cast<std::size_t>(j)]);
      if (off > c.per_dim[static_cast<std::size_t>(j)].second -
                    c.per_dim[static_cast<std::size_t>(j)].first)
        throw EncodingError("decode: momentum offset outside cutoff range");
      m.momentum.push_back(static_cast<int>(off + c.per_dim[static_cast<std::size_t>(j)].first));
    }
    m.occupancy = static_cast<int>(rd.get(layout.bits_occupancy));
    if (m.occupancy == 0) {
      bool zero = m.particle == 0;
      for (int j = 0; j < c.dims(); ++j)
        zero = zero && m.momentum[static_cast<std::size_t>(j)] ==
                           c.per_dim[static_cast<std::size_t>(j)].first;
      if (!zero)
        throw EncodingError("decode: zero-occupancy register with nonzero fields");
      seen_empty = true;
      continue;
    }
    if (seen_empty)
      throw EncodingError("decode: encoded mode after an empty register");
    if (m.occupancy > c.occupancy_cap)
      throw EncodingError("decode: occupancy exceeds cap");
    if (!modes.empty() && !mode_key_less(modes.back(), m))
      throw EncodingError("decode: modes not in canonical order");
    modes.push_back(std::move(m));
  }
  return FockState{std::move(modes)};
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b & 0xf]);
    s.push_back(digits[b >> 4]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw EncodingError("from_hex: invalid hex digit");
  };
  if (hex.size() % 2 != 0) throw EncodingError("from_hex: odd-length hex string");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < hex.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>(nibble(hex[i]) | (nibble(hex[i + 1]) << 4)));
  return out;
}

std::string to_string(const Mode& m, const ParticleRegistry& registry) {
  std::ostringstream os;
  os << "(" << registry.at(m.particle).name << ",";
  for (std::size_t j = 0; j < m.momentum.size(); ++j) {
    if (j) os << ";";
    os << m.momentum[j];
  }
  os << "," << m.occupancy << ")";
  return os.str();
}

std::string to_string(const FockState& s, const ParticleRegistry& registry) {
  if (s.modes.empty()) return "|vac>";
  std::string out = "|";
  for (std::size_t i = 0; i < s.modes.size(); ++i) {
    if (i) out += ",";
    out += to_string(s.modes[i], registry);
  }
  out += ">";
  return out;
}

}  // namespace fockforge
