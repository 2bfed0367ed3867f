#include "fockforge/oracle_enumerator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace fockforge {

namespace {

// ---------------------------------------------------------------------------
// Shared combinatorics
// ---------------------------------------------------------------------------

long long binom(long long n, long long k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long r = 1;
  for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Same-type leg groups, keeping leg positions (legs of one particle code may
// be non-adjacent in the declared order).
struct LegGroup {
  int particle = 0;
  bool fermionic = false;
  std::vector<int> positions;  // 0-based leg indices
};

std::vector<LegGroup> leg_groups(const std::vector<std::pair<int, std::string>>& legs,
                                 const ParticleRegistry& registry) {
  std::map<int, LegGroup> by_code;
  for (std::size_t p = 0; p < legs.size(); ++p) {
    auto& grp = by_code[legs[p].first];
    grp.particle = legs[p].first;
    grp.fermionic = registry.is_fermionic(legs[p].first);
    grp.positions.push_back(static_cast<int>(p));
  }
  std::vector<LegGroup> out;
  for (auto& [code, grp] : by_code) out.push_back(std::move(grp));
  return out;
}

// All momentum-box points, lexicographically decreasing.
std::vector<Momentum> box_points_desc(const Cutoffs& cutoffs) {
  std::vector<Momentum> pts;
  Momentum cur(static_cast<std::size_t>(cutoffs.dims()), 0);
  std::function<void(int)> rec = [&](int dim) {
    if (dim == cutoffs.dims()) {
      pts.push_back(cur);
      return;
    }
    const auto [lo, hi] = cutoffs.per_dim[static_cast<std::size_t>(dim)];
    for (int v = hi; v >= lo; --v) {
      cur[static_cast<std::size_t>(dim)] = v;
      rec(dim + 1);
    }
  };
  rec(0);
  return pts;
}

// Reachable transferred-momentum window: intersection of the outgoing-sum
// range, the incoming-sum range, and (light front, axis 1) the cap at K.
struct QRange {
  std::vector<std::pair<long long, long long>> per_dim;

  bool contains(const Momentum& Q) const {
    for (std::size_t j = 0; j < per_dim.size(); ++j)
      if (Q[j] < per_dim[j].first || Q[j] > per_dim[j].second) return false;
    return true;
  }
};

QRange q_range(const Interaction& ix, const Cutoffs& cutoffs) {
  const long long g = ix.g();
  const long long h = ix.n_incoming();
  QRange r;
  for (int j = 0; j < cutoffs.dims(); ++j) {
    const auto [lo, hi] = cutoffs.per_dim[static_cast<std::size_t>(j)];
    long long out_lo = g == 0 ? 0 : g * lo;
    long long out_hi = g == 0 ? 0 : g * hi;
    long long in_lo = h == 0 ? 0 : h * lo;
    long long in_hi = h == 0 ? 0 : h * hi;
    long long qlo = std::max(out_lo, in_lo);
    long long qhi = std::min(out_hi, in_hi);
    if (j == 0 && cutoffs.quantization == Quantization::light_front)
      qhi = std::min(qhi, static_cast<long long>(cutoffs.harmonic_resolution()));
    r.per_dim.emplace_back(qlo, qhi);
  }
  return r;
}

std::vector<int> flatten(const std::vector<Momentum>& tuple) {
  std::vector<int> flat;
  for (const auto& m : tuple) flat.insert(flat.end(), m.begin(), m.end());
  return flat;
}

Momentum tuple_sum(const std::vector<Momentum>& tuple, int dims) {
  Momentum s(static_cast<std::size_t>(dims), 0);
  for (const auto& m : tuple)
    for (int j = 0; j < dims; ++j) s[static_cast<std::size_t>(j)] += m[static_cast<std::size_t>(j)];
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Lookup table
// ---------------------------------------------------------------------------

int LookupTable::rows_for(const Momentum& Q) const {
  auto lo = std::lower_bound(rows.begin(), rows.end(), Q, [](const LookupRow& r, const Momentum& q) {
    return r.Q < q;
  });
  int n = 0;
  for (auto it = lo; it != rows.end() && it->Q == Q; ++it) ++n;
  return n;
}

const LookupRow* LookupTable::find(const Momentum& Q, int i_low) const {
  auto lo = std::lower_bound(rows.begin(), rows.end(), Q, [](const LookupRow& r, const Momentum& q) {
    return r.Q < q;
  });
  for (auto it = lo; it != rows.end() && it->Q == Q; ++it)
    if (it->i_low == i_low) return &*it;
  return nullptr;
}

long long LookupTable::distinct_Q() const {
  long long n = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (i == 0 || rows[i].Q != rows[i - 1].Q) ++n;
  return n;
}

// Shared row enumeration. With restrict_range the sum is confined to the
// reachable Q window (the semantic lookup table); without it every canonical
// in-box tuple appears (the circuit's step-3 sweep, which iterates over all
// possible outgoing-momentum values rather than only reachable ones).
static LookupTable enumerate_rows(const Interaction& interaction, const Cutoffs& cutoffs,
                                  const ParticleRegistry& registry, bool restrict_range) {
  const int dims = cutoffs.dims();
  const auto groups = leg_groups(interaction.outgoing, registry);
  const auto values = box_points_desc(cutoffs);
  const QRange range = q_range(interaction, cutoffs);

  // Canonical per-group sequences: indices into the decreasing value list are
  // non-decreasing, which makes the momenta non-increasing (strictly
  // decreasing for fermionic groups).
  auto group_sequences = [&](const LegGroup& grp) {
    std::vector<std::vector<Momentum>> seqs;
    const int c = static_cast<int>(grp.positions.size());
    std::vector<Momentum> cur;
    std::function<void(int, std::size_t)> rec = [&](int t, std::size_t j) {
      if (t == c) {
        seqs.push_back(cur);
        return;
      }
      for (std::size_t idx = j; idx < values.size(); ++idx) {
        cur.push_back(values[idx]);
        rec(t + 1, grp.fermionic ? idx + 1 : idx);
        cur.pop_back();
      }
    };
    rec(0, 0);
    return seqs;
  };

  std::vector<std::vector<std::vector<Momentum>>> all_seqs;
  all_seqs.reserve(groups.size());
  for (const auto& grp : groups) all_seqs.push_back(group_sequences(grp));

  std::map<Momentum, std::vector<std::vector<Momentum>>> buckets;
  std::vector<Momentum> tuple(interaction.outgoing.size());
  std::function<void(std::size_t)> combine = [&](std::size_t gi) {
    if (gi == groups.size()) {
      const Momentum Q = tuple_sum(tuple, dims);
      if (!restrict_range || range.contains(Q)) buckets[Q].push_back(tuple);
      return;
    }
    for (const auto& seq : all_seqs[gi]) {
      for (std::size_t p = 0; p < seq.size(); ++p)
        tuple[static_cast<std::size_t>(groups[gi].positions[p])] = seq[p];
      combine(gi + 1);
    }
  };
  combine(0);

  LookupTable table;
  for (auto& [Q, tuples] : buckets) {
    std::sort(tuples.begin(), tuples.end(),
              [](const std::vector<Momentum>& a, const std::vector<Momentum>& b) {
                return flatten(a) > flatten(b);  // lexicographically decreasing
              });
    int i_low = 0;
    for (auto& t : tuples) table.rows.push_back(LookupRow{Q, i_low++, t});
    table.a = std::max(table.a, static_cast<long long>(tuples.size()));
  }
  return table;
}

LookupTable build_lookup_table(const Interaction& interaction, const Cutoffs& cutoffs,
                               const ParticleRegistry& registry) {
  return enumerate_rows(interaction, cutoffs, registry, true);
}

// ---------------------------------------------------------------------------
// Analytic counts
// ---------------------------------------------------------------------------

namespace {

using QCount = std::map<Momentum, long long>;

// Counts of canonical length-c sequences per momentum sum, without
// materializing them.
QCount group_sum_counts(int c, bool fermionic, const std::vector<Momentum>& values, int dims) {
  std::vector<std::vector<std::optional<QCount>>> memo(
      static_cast<std::size_t>(c + 1),
      std::vector<std::optional<QCount>>(values.size() + 1));
  std::function<const QCount&(int, std::size_t)> rec = [&](int t, std::size_t j) -> const QCount& {
    auto& slot = memo[static_cast<std::size_t>(t)][j];
    if (slot) return *slot;
    QCount out;
    if (t == 0) {
      out[Momentum(static_cast<std::size_t>(dims), 0)] = 1;
    } else if (j < values.size()) {
      out = rec(t, j + 1);
      const QCount& rest = rec(t - 1, fermionic ? j + 1 : j);
      for (const auto& [q, n] : rest) {
        Momentum shifted = q;
        for (int k = 0; k < dims; ++k)
          shifted[static_cast<std::size_t>(k)] += values[j][static_cast<std::size_t>(k)];
        out[shifted] += n;
      }
    }
    slot = std::move(out);
    return *slot;
  };
  return rec(c, 0);
}

}  // namespace

InteractionCounts interaction_counts(const Interaction& interaction, const Cutoffs& cutoffs,
                                     const ParticleRegistry& registry) {
  const int dims = cutoffs.dims();
  const auto values = box_points_desc(cutoffs);
  const QRange range = q_range(interaction, cutoffs);

  QCount conv;
  conv[Momentum(static_cast<std::size_t>(dims), 0)] = 1;
  for (const auto& grp : leg_groups(interaction.outgoing, registry)) {
    const QCount gc =
        group_sum_counts(static_cast<int>(grp.positions.size()), grp.fermionic, values, dims);
    QCount next;
    for (const auto& [qa, na] : conv)
      for (const auto& [qb, nb] : gc) {
        Momentum q = qa;
        for (int k = 0; k < dims; ++k) q[static_cast<std::size_t>(k)] += qb[static_cast<std::size_t>(k)];
        next[q] += na * nb;
      }
    conv = std::move(next);
  }

  InteractionCounts out;
  for (const auto& [q, n] : conv) {
    if (!range.contains(q)) continue;
    out.n_rows += n;
    ++out.n_distinct_Q;
    out.a = std::max(out.a, n);
  }

  // Ordered selector tuples: every leg independently picks a register. Legs
  // of the same type are not deduplicated here because the coefficient need
  // not be symmetric under exchanging them (pole exclusions can differ per
  // orientation); redundant orientations are handled by duplicate flagging.
  out.n_J = 1;
  for (int m = 0; m < interaction.n_incoming(); ++m)
    out.n_J *= cutoffs.register_count;
  const long long M = static_cast<long long>(values.size());
  for (const auto& grp : leg_groups(interaction.outgoing, registry)) {
    const long long c = static_cast<long long>(grp.positions.size());
    out.n_box_tuples *= grp.fermionic ? binom(M, c) : binom(M + c - 1, c);
  }
  out.index_space = out.n_J * out.a;
  return out;
}

long long index_space_size(const Interaction& interaction, const Cutoffs& cutoffs,
                           const ParticleRegistry& registry) {
  return interaction_counts(interaction, cutoffs, registry).index_space;
}

// ---------------------------------------------------------------------------
// Oracle construction
// ---------------------------------------------------------------------------

namespace {

// Incoming selectors in index order: one 1-based register per incoming leg,
// lexicographic over all ordered tuples. Same-type legs are not merged into
// unordered multisets: a coefficient can distinguish the orientations (e.g.
// a pole in one leg symbol only), so every orientation must be reachable;
// orientations mapping to the same target are pruned by duplicate flagging.
std::vector<std::vector<int>> enumerate_J(const Interaction& ix, int I) {
  const int h = ix.n_incoming();
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(h), 0);
  std::function<void(int)> rec = [&](int m) {
    if (m == h) {
      out.push_back(cur);
      return;
    }
    for (int j = 1; j <= I; ++j) {
      cur[static_cast<std::size_t>(m)] = j;
      rec(m + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace

ModelOracle build_oracle(const ModelSpec& model) {
  model.cutoffs.check();
  ModelOracle oracle;
  oracle.model = model;
  long long offset = 0;
  for (const auto& ix : model.interactions) {
    InteractionOracle blk;
    blk.interaction = ix;
    blk.table = build_lookup_table(ix, model.cutoffs, model.particles);
    blk.j_values = enumerate_J(ix, model.cutoffs.register_count);
    blk.index_space = static_cast<long long>(blk.j_values.size()) * blk.table.a;
    blk.offset = offset;
    blk.poles = extract_pole_predicates(ix, model);
    offset += blk.index_space;
    oracle.blocks.push_back(std::move(blk));
  }
  oracle.index_space_size = offset;
  return oracle;
}

double orientation_summed_coeff(const ModelSpec& model, const Interaction& interaction,
                                const std::vector<Momentum>& incoming_momenta,
                                const std::vector<Momentum>& outgoing) {
  std::map<std::string, double> legs;
  for (std::size_t m = 0; m < interaction.incoming.size(); ++m)
    legs[interaction.incoming[m].second] = incoming_momenta[m][0];

  struct Arrangement {
    std::vector<double> vals;
    double sign = 1.0;
  };
  const auto groups = leg_groups(interaction.outgoing, model.particles);
  std::vector<std::vector<Arrangement>> per_group;
  for (const auto& grp : groups) {
    std::vector<double> v;
    for (int pos : grp.positions) v.push_back(outgoing[static_cast<std::size_t>(pos)][0]);
    std::sort(v.begin(), v.end());
    std::vector<Arrangement> arrs;
    do {
      Arrangement a;
      a.vals = v;
      if (grp.fermionic) {  // distinct values; inversion parity is well defined
        int inv = 0;
        for (std::size_t x = 0; x < v.size(); ++x)
          for (std::size_t y = x + 1; y < v.size(); ++y)
            if (v[x] > v[y]) ++inv;
        a.sign = (inv % 2 != 0) ? -1.0 : 1.0;
      }
      arrs.push_back(std::move(a));
    } while (std::next_permutation(v.begin(), v.end()));
    per_group.push_back(std::move(arrs));
  }

  double sum = 0.0;
  bool any_orientation = false;
  std::vector<std::size_t> pick(per_group.size(), 0);
  while (true) {
    double sign = 1.0;
    for (std::size_t g = 0; g < per_group.size(); ++g) {
      const Arrangement& a = per_group[g][pick[g]];
      sign *= a.sign;
      for (std::size_t x = 0; x < a.vals.size(); ++x)
        legs[interaction.outgoing[static_cast<std::size_t>(groups[g].positions[x])].second] =
            a.vals[x];
    }
    try {
      sum += sign * eval_coeff(interaction.coeff, legs, model);
      any_orientation = true;
    } catch (const PoleError&) {
      // this orientation contributes nothing
    }
    std::size_t g = 0;
    while (g < pick.size() && ++pick[g] == per_group[g].size()) pick[g++] = 0;
    if (g == pick.size()) break;
  }
  if (!any_orientation)
    throw PoleError("every outgoing-leg orientation is pole-excluded");
  return sum;
}

// ---------------------------------------------------------------------------
// Semantic oracle
// ---------------------------------------------------------------------------

namespace {

// One application of index i without the duplicate-transition check.
EnumResult raw_enumerate(const ModelOracle& oracle, const FockState& F, long long i) {
  if (i < 0 || i >= oracle.index_space_size)
    throw Error("enumerate: index " + std::to_string(i) + " outside the index space");

  const ModelSpec& model = oracle.model;
  const Cutoffs& co = model.cutoffs;
  const int dims = co.dims();

  EnumResult res;
  res.trace.i = i;
  res.f_prime = F;
  res.a_flag = i + 1;

  // Invalid indices echo i + 1 (one-based) so that 0 unambiguously means
  // valid; echoing i itself would make an invalid index 0 collide with a
  // valid diagonal transition and break injectivity.
  auto flag = [&](const std::string& reason) {
    res.trace.flag = 1;
    res.trace.flag_reason = reason;
    res.f_prime = F;
    res.a_flag = i + 1;
  };

  std::size_t t = 0;
  while (i >= oracle.blocks[t].offset + oracle.blocks[t].index_space) ++t;
  const InteractionOracle& blk = oracle.blocks[t];
  const Interaction& ix = blk.interaction;
  EnumTrace& tr = res.trace;
  tr.interaction_index = static_cast<int>(t);
  const long long l = i - blk.offset;
  tr.i_high = l / blk.table.a;
  tr.i_low = l % blk.table.a;
  tr.J = blk.j_values[static_cast<std::size_t>(tr.i_high)];
  tr.Q.assign(static_cast<std::size_t>(dims), 0);
  const int h = ix.n_incoming();
  tr.emptied.assign(static_cast<std::size_t>(h), 0);

  // Annihilations in listed incoming-leg order, on a working copy keeping the
  // original register positions.
  std::vector<Mode> work = F.modes;
  for (int m = 0; m < h; ++m) {
    const int r = tr.J[static_cast<std::size_t>(m)];
    const int c = ix.incoming[static_cast<std::size_t>(m)].first;
    if (r > static_cast<int>(work.size())) {
      flag("selector points at an empty register");
      return res;
    }
    Mode& md = work[static_cast<std::size_t>(r - 1)];
    if (md.particle != c) {
      flag("selector particle type mismatch");
      return res;
    }
    if (md.occupancy == 0) {
      flag("occupancy shortfall");
      return res;
    }
    int preceding = 0;
    for (int rr = 0; rr < r - 1; ++rr)
      if (work[static_cast<std::size_t>(rr)].particle == c)
        preceding += work[static_cast<std::size_t>(rr)].occupancy;
    tr.parity_in.push_back(preceding);
    tr.w_in.push_back(md.occupancy);
    md.occupancy -= 1;
    if (md.occupancy == 0) tr.emptied[static_cast<std::size_t>(m)] = r;
    tr.incoming_momenta.push_back(md.momentum);
    for (int j = 0; j < dims; ++j)
      tr.Q[static_cast<std::size_t>(j)] += md.momentum[static_cast<std::size_t>(j)];
  }
  // Drop emptied registers (ordering among survivors is preserved).
  std::vector<Mode> packed;
  for (const auto& md : work)
    if (md.occupancy > 0) packed.push_back(md);
  work = std::move(packed);

  const int nrows = blk.table.rows_for(tr.Q);
  if (tr.i_low >= nrows) {
    flag("unused index (no lookup row)");
    return res;
  }
  const LookupRow* row = blk.table.find(tr.Q, static_cast<int>(tr.i_low));
  tr.outgoing = row->outgoing;

  // Coefficient validity (axis-1 leg momenta). The table stores one
  // canonical arrangement per same-type outgoing group, but a coefficient
  // need not be symmetric under permuting those legs (a pole can involve one
  // leg symbol only), so validity is decided on the orientation-summed
  // coefficient, matching the brute-force operator sum restricted to this
  // selector and outgoing multiset.
  if (dims == 1) {
    try {
      if (orientation_summed_coeff(model, ix, tr.incoming_momenta, tr.outgoing) == 0.0) {
        flag("vanishing coefficient");
        return res;
      }
    } catch (const PoleError&) {
      flag("pole-excluded assignment");
      return res;
    } catch (const DomainError&) {
      flag("coefficient domain error");
      return res;
    }
  }

  // Creations in listed outgoing-leg order.
  for (std::size_t p = 0; p < ix.outgoing.size(); ++p) {
    const int c = ix.outgoing[p].first;
    const Momentum& n = tr.outgoing[p];
    const bool fermionic = model.particles.is_fermionic(c);
    Mode probe{c, n, 1};
    std::size_t pos = 0;
    while (pos < work.size() && mode_key_less(work[pos], probe)) ++pos;
    const bool occupied =
        pos < work.size() && work[pos].particle == c && work[pos].momentum == n;
    int preceding = 0;
    for (std::size_t rr = 0; rr < pos; ++rr)
      if (work[rr].particle == c) preceding += work[rr].occupancy;
    if (occupied) {
      if (fermionic) {
        flag("fermionic double occupancy");
        return res;
      }
      if (work[pos].occupancy + 1 > co.occupancy_cap) {
        flag("occupancy cap exceeded");
        return res;
      }
      tr.parity_out.push_back(preceding);
      work[pos].occupancy += 1;
      tr.w_out.push_back(work[pos].occupancy);
      tr.insertion_positions.push_back(0);
    } else {
      if (static_cast<int>(work.size()) + 1 > co.register_count) {
        flag("register overflow");
        return res;
      }
      tr.parity_out.push_back(preceding);
      work.insert(work.begin() + static_cast<std::ptrdiff_t>(pos), probe);
      tr.w_out.push_back(1);
      tr.insertion_positions.push_back(static_cast<int>(pos) + 1);
    }
  }

  res.f_prime = FockState{work};
  res.a_flag = 0;
  return res;
}

}  // namespace

EnumResult enumerate_semantic(const ModelOracle& oracle, const FockState& F, long long i) {
  EnumResult res = raw_enumerate(oracle, F, i);
  if (res.a_flag != 0) return res;
  for (long long ip = 0; ip < i; ++ip) {
    EnumResult prev = raw_enumerate(oracle, F, ip);
    if (prev.a_flag == 0 && prev.f_prime == res.f_prime) {
      res.trace.flag = 1;
      res.trace.flag_reason = "duplicate transition (smaller valid index exists)";
      res.f_prime = F;
      res.a_flag = i + 1;
      return res;
    }
  }
  return res;
}

std::vector<EnumResult> enumerate_all(const ModelOracle& oracle, const FockState& F) {
  std::vector<EnumResult> out;
  out.reserve(static_cast<std::size_t>(oracle.index_space_size));
  std::set<FockState> seen;
  for (long long i = 0; i < oracle.index_space_size; ++i) {
    EnumResult res = raw_enumerate(oracle, F, i);
    if (res.a_flag == 0) {
      if (!seen.insert(res.f_prime).second) {
        res.trace.flag = 1;
        res.trace.flag_reason = "duplicate transition (smaller valid index exists)";
        res.f_prime = F;
        res.a_flag = i + 1;
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

std::vector<EnumResult> connected_states(const ModelOracle& oracle, const FockState& F) {
  std::vector<EnumResult> out;
  for (auto& res : enumerate_all(oracle, F))
    if (res.a_flag == 0) out.push_back(std::move(res));
  return out;
}

// ---------------------------------------------------------------------------
// Reversible circuit: builder
// ---------------------------------------------------------------------------

namespace {

using Rel = LinearTest::Rel;

LinearTest atom(std::vector<std::pair<int, long long>> terms, long long constant, Rel rel) {
  LinearTest t;
  t.terms = std::move(terms);
  t.constant = constant;
  t.rel = rel;
  return t;
}
LinearTest reg_eq(int reg, long long v) { return atom({{reg, 1}}, -v, Rel::eq); }
LinearTest reg_ne(int reg, long long v) { return atom({{reg, 1}}, -v, Rel::ne); }
LinearTest reg_ge(int reg, long long v) { return atom({{reg, 1}}, -v, Rel::ge); }
LinearTest reg_le(int reg, long long v) { return atom({{reg, 1}}, -v, Rel::le); }
LinearTest regs_eq(int a, int b) { return atom({{a, 1}, {b, -1}}, 0, Rel::eq); }

Effect fx_xor(int target, long long value) {
  Effect e;
  e.kind = Effect::Kind::xor_const;
  e.target = target;
  e.value = value;
  return e;
}
Effect fx_xorreg(int target, int source) {
  Effect e;
  e.kind = Effect::Kind::xor_reg;
  e.target = target;
  e.source = source;
  return e;
}
Effect fx_add(int target, long long value) {
  Effect e;
  e.kind = Effect::Kind::add_const;
  e.target = target;
  e.value = value;
  return e;
}
Effect fx_addlin(int target, std::vector<std::pair<int, long long>> terms, long long c = 0) {
  Effect e;
  e.kind = Effect::Kind::add_lin;
  e.target = target;
  e.terms = std::move(terms);
  e.value = c;
  return e;
}
Effect fx_swap(int a, int b) {
  Effect e;
  e.kind = Effect::Kind::swap;
  e.target = a;
  e.source = b;
  return e;
}

enum class Bucket { s1, s2, s3, s4, overhead };

struct Builder {
  LogLocalCircuit c;

  int alloc(std::string name) {
    c.register_names.push_back(std::move(name));
    return c.n_registers++;
  }

  void emit(std::vector<LinearTest> tests, std::vector<KeyLessTest> key_tests,
            std::vector<Effect> effects, OpCategory cat, Bucket bucket) {
    Op op;
    op.controls.tests = std::move(tests);
    op.controls.key_tests = std::move(key_tests);
    op.effects = std::move(effects);
    op.category = cat;
    switch (bucket) {
      case Bucket::s1: op.step = StepTag::step1; c.tally.step1++; break;
      case Bucket::s2: op.step = StepTag::step2; c.tally.step2++; break;
      case Bucket::s3: op.step = StepTag::step3; c.tally.step3++; break;
      case Bucket::s4: op.step = StepTag::step4; c.tally.step4++; break;
      case Bucket::overhead: op.step = StepTag::copyout; c.tally.uncompute++; break;
    }
    c.tally.per_category[cat]++;
    check_disjoint(op);
    c.ops.push_back(std::move(op));
  }

  void check_disjoint(const Op& op) const {
    std::set<int> targets;
    for (const auto& e : op.effects) {
      targets.insert(e.target);
      if (e.kind == Effect::Kind::swap) targets.insert(e.source);
    }
    auto hit = [&](int reg) { return targets.count(reg) != 0; };
    for (const auto& t : op.controls.tests)
      for (const auto& [reg, coeff] : t.terms)
        if (hit(reg))
          throw Error("circuit builder: control register is also a target: " +
                      c.register_names[static_cast<std::size_t>(reg)]);
    for (const auto& k : op.controls.key_tests) {
      if (hit(k.lhs_label_reg)) throw Error("circuit builder: control register is also a target");
      for (int r : k.lhs_mom_regs)
        if (hit(r)) throw Error("circuit builder: control register is also a target");
      for (int r : k.rhs_mom_regs)
        if (hit(r)) throw Error("circuit builder: control register is also a target");
    }
    for (const auto& e : op.effects)
      if (e.kind == Effect::Kind::add_lin)
        for (const auto& [reg, coeff] : e.terms)
          if (targets.count(reg) && reg != e.target)
            throw Error("circuit builder: add_lin source is also a target");
  }
};

Op invert_op(const Op& op) {
  Op inv;
  inv.controls = op.controls;
  inv.category = op.category;
  inv.step = op.step;
  for (auto it = op.effects.rbegin(); it != op.effects.rend(); ++it) {
    Effect e = *it;
    if (e.kind == Effect::Kind::add_const) {
      e.value = -e.value;
    } else if (e.kind == Effect::Kind::add_lin) {
      e.value = -e.value;
      for (auto& [reg, coeff] : e.terms) coeff = -coeff;
    }
    inv.effects.push_back(std::move(e));
  }
  return inv;
}

// Per-interaction compile-time data shared by the builder and the analytic
// tally.
struct BlockShape {
  std::map<int, int> in_count, out_count;       // per particle code
  std::vector<int> x_types;                      // codes with in and out legs
  std::vector<std::size_t> earlier_matches;      // earlier interactions, same delta
  bool need_counts = false;
};

BlockShape block_shape(const std::vector<Interaction>& interactions, std::size_t t,
                       const ParticleRegistry& registry) {
  BlockShape s;
  auto counts_of = [&](const Interaction& ix) {
    std::pair<std::map<int, int>, std::map<int, int>> c;
    for (const auto& [code, sym] : ix.incoming) c.first[code]++;
    for (const auto& [code, sym] : ix.outgoing) c.second[code]++;
    return c;
  };
  auto [in_c, out_c] = counts_of(interactions[t]);
  s.in_count = in_c;
  s.out_count = out_c;
  for (int code = 0; code < registry.size(); ++code)
    if (s.in_count[code] >= 1 && s.out_count[code] >= 1) s.x_types.push_back(code);
  auto delta_of = [&](const Interaction& ix) {
    std::vector<int> delta(static_cast<std::size_t>(registry.size()), 0);
    for (const auto& [code, sym] : ix.outgoing) delta[static_cast<std::size_t>(code)]++;
    for (const auto& [code, sym] : ix.incoming) delta[static_cast<std::size_t>(code)]--;
    return delta;
  };
  const auto delta_t = delta_of(interactions[t]);
  for (std::size_t tp = 0; tp < t; ++tp)
    if (delta_of(interactions[tp]) == delta_t) s.earlier_matches.push_back(tp);
  s.need_counts = !s.x_types.empty() || !s.earlier_matches.empty();
  return s;
}

}  // namespace

LogLocalCircuit circuit_build(const ModelOracle& oracle) {
  const ModelSpec& model = oracle.model;
  const Cutoffs& co = model.cutoffs;
  const int I = co.register_count;
  const int d = co.dims();
  const long long W = co.occupancy_cap;

  Builder B;
  B.c.I = I;
  B.c.dims = d;
  B.c.index_space_size = oracle.index_space_size;

  auto alloc_modes = [&](const std::string& prefix, std::vector<int>& label,
                         std::vector<std::vector<int>>& mom, std::vector<int>& occ) {
    label.resize(static_cast<std::size_t>(I));
    occ.resize(static_cast<std::size_t>(I));
    mom.assign(static_cast<std::size_t>(I), std::vector<int>(static_cast<std::size_t>(d)));
    for (int r = 0; r < I; ++r) {
      const std::string base = prefix + std::to_string(r);
      label[static_cast<std::size_t>(r)] = B.alloc(base + ".label");
      for (int j = 0; j < d; ++j)
        mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] =
            B.alloc(base + ".n" + std::to_string(j));
      occ[static_cast<std::size_t>(r)] = B.alloc(base + ".w");
    }
  };
  alloc_modes("in", B.c.in_label, B.c.in_mom, B.c.in_occ);
  alloc_modes("out", B.c.out_label, B.c.out_mom, B.c.out_occ);
  alloc_modes("res", B.c.res_label, B.c.res_mom, B.c.res_occ);
  B.c.i_reg = B.alloc("i");
  B.c.a_out = B.alloc("a");
  B.c.flag = B.alloc("flag");

  const int i_reg = B.c.i_reg;
  const int flag = B.c.flag;

  // Prologue: copy F into the working registers.
  for (int r = 0; r < I; ++r) {
    std::vector<Effect> fx{fx_xorreg(B.c.out_label[static_cast<std::size_t>(r)],
                                     B.c.in_label[static_cast<std::size_t>(r)])};
    for (int j = 0; j < d; ++j)
      fx.push_back(fx_xorreg(B.c.out_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)],
                             B.c.in_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]));
    fx.push_back(fx_xorreg(B.c.out_occ[static_cast<std::size_t>(r)],
                           B.c.in_occ[static_cast<std::size_t>(r)]));
    B.emit({}, {}, std::move(fx), OpCategory::copy, Bucket::overhead);
  }

  for (std::size_t t = 0; t < oracle.blocks.size(); ++t) {
    const InteractionOracle& blk = oracle.blocks[t];
    const Interaction& ix = blk.interaction;
    const int g = ix.g();
    const int h = ix.n_incoming();
    const long long a = blk.table.a;
    const long long V = static_cast<long long>(blk.j_values.size());
    const long long off = blk.offset;
    const std::string bp = "b" + std::to_string(t) + ".";
    const BlockShape shape = block_shape(model.interactions, t, model.particles);

    // ---- step 1: block select, index split, selector decode ----
    const int act = B.alloc(bp + "act");
    const int l = B.alloc(bp + "l");
    const int ih = B.alloc(bp + "ihigh");
    const int il = B.alloc(bp + "ilow");
    std::vector<int> J, E, found, pos;
    std::vector<std::vector<int>> nin, outn;
    for (int m = 0; m < h; ++m) J.push_back(B.alloc(bp + "J" + std::to_string(m)));
    for (int m = 0; m < h; ++m) {
      nin.emplace_back();
      for (int j = 0; j < d; ++j)
        nin.back().push_back(B.alloc(bp + "nin" + std::to_string(m) + "." + std::to_string(j)));
    }
    std::vector<int> Qr;
    for (int j = 0; j < d; ++j) Qr.push_back(B.alloc(bp + "Q" + std::to_string(j)));
    for (int m = 0; m < h; ++m) E.push_back(B.alloc(bp + "E" + std::to_string(m)));
    const int nrows = B.alloc(bp + "nrows");
    for (int lg = 0; lg < g; ++lg) {
      outn.emplace_back();
      for (int j = 0; j < d; ++j)
        outn.back().push_back(B.alloc(bp + "outn" + std::to_string(lg) + "." + std::to_string(j)));
    }
    for (int lg = 0; lg < g; ++lg) found.push_back(B.alloc(bp + "found" + std::to_string(lg)));
    for (int lg = 0; lg < g; ++lg) pos.push_back(B.alloc(bp + "pos" + std::to_string(lg)));

    const LinearTest on = reg_eq(act, 1);

    B.emit({reg_ge(i_reg, off), reg_le(i_reg, off + V * a - 1)}, {}, {fx_xor(act, 1)},
           OpCategory::compare, Bucket::s1);
    B.emit({on}, {}, {fx_addlin(l, {{i_reg, 1}}, -off)}, OpCategory::addsub, Bucket::s1);
    // One op per selector value: within its a-sized slice of the local index,
    // set i_high, extract i_low, and load the J registers together.
    for (long long v = 0; v < V; ++v) {
      std::vector<Effect> fx{fx_xor(ih, v), fx_addlin(il, {{l, 1}}, -v * a)};
      for (int m = 0; m < h; ++m)
        fx.push_back(fx_xor(J[static_cast<std::size_t>(m)],
                            blk.j_values[static_cast<std::size_t>(v)][static_cast<std::size_t>(m)]));
      B.emit({on, reg_ge(l, v * a), reg_le(l, v * a + a - 1)}, {}, std::move(fx),
             OpCategory::controlled_set, Bucket::s1);
    }

    // ---- step 2: annihilations on the working copy ----
    for (int m = 0; m < h; ++m) {
      const int c = ix.incoming[static_cast<std::size_t>(m)].first;
      const int Jm = J[static_cast<std::size_t>(m)];
      for (int r = 0; r < I; ++r) {
        const int ol = B.c.out_label[static_cast<std::size_t>(r)];
        const int ow = B.c.out_occ[static_cast<std::size_t>(r)];
        B.emit({on, reg_eq(Jm, r + 1), reg_eq(ow, 0)}, {}, {fx_add(flag, 1)},
               OpCategory::compare, Bucket::s2);
        B.emit({on, reg_eq(Jm, r + 1), reg_ne(ow, 0), reg_ne(ol, c)}, {}, {fx_add(flag, 1)},
               OpCategory::compare, Bucket::s2);
        for (int j = 0; j < d; ++j)
          B.emit({on, reg_eq(Jm, r + 1)}, {},
                 {fx_addlin(nin[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)],
                            {{B.c.out_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)], 1}})},
                 OpCategory::addsub, Bucket::s2);
        B.emit({on, reg_eq(Jm, r + 1)}, {}, {fx_add(ow, -1)}, OpCategory::addsub, Bucket::s2);
      }
      for (int j = 0; j < d; ++j)
        B.emit({on}, {},
               {fx_addlin(Qr[static_cast<std::size_t>(j)],
                          {{nin[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)], 1}})},
               OpCategory::addsub, Bucket::s2);
      for (int r = 0; r < I; ++r)
        B.emit({on, reg_eq(Jm, r + 1), reg_eq(B.c.out_occ[static_cast<std::size_t>(r)], 0)}, {},
               {fx_xor(E[static_cast<std::size_t>(m)], r + 1)}, OpCategory::controlled_set,
               Bucket::s2);
      for (int r = 0; r < I; ++r)
        B.emit({on, reg_eq(E[static_cast<std::size_t>(m)], r + 1)}, {},
               {fx_xor(B.c.out_label[static_cast<std::size_t>(r)], c)},
               OpCategory::controlled_set, Bucket::s2);
      for (int r = 0; r < I; ++r)
        for (int j = 0; j < d; ++j)
          B.emit({on, reg_eq(E[static_cast<std::size_t>(m)], r + 1)}, {},
                 {fx_addlin(B.c.out_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)],
                            {{nin[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)], -1}})},
                 OpCategory::addsub, Bucket::s2);
    }
    // Reorder: bubble each emptied register to the back, adjusting later E
    // values that referred to positions past it.
    auto swap_regs = [&](int r1, int r2) {
      std::vector<Effect> fx{fx_swap(B.c.out_label[static_cast<std::size_t>(r1)],
                                     B.c.out_label[static_cast<std::size_t>(r2)])};
      for (int j = 0; j < d; ++j)
        fx.push_back(fx_swap(B.c.out_mom[static_cast<std::size_t>(r1)][static_cast<std::size_t>(j)],
                             B.c.out_mom[static_cast<std::size_t>(r2)][static_cast<std::size_t>(j)]));
      fx.push_back(fx_swap(B.c.out_occ[static_cast<std::size_t>(r1)],
                           B.c.out_occ[static_cast<std::size_t>(r2)]));
      return fx;
    };
    for (int m = 0; m < h; ++m) {
      const int Em = E[static_cast<std::size_t>(m)];
      for (int j = 1; j <= I - 1; ++j)
        B.emit({on, reg_ge(Em, 1), reg_le(Em, j)}, {}, swap_regs(j - 1, j), OpCategory::swap,
               Bucket::s2);
      for (int mp = m + 1; mp < h; ++mp) {
        const int Emp = E[static_cast<std::size_t>(mp)];
        // The comparison must be latched before the decrement: a predicate on
        // the decrement target itself would not be reversible.
        const int cmp = B.alloc(bp + "Ecmp" + std::to_string(m) + "_" + std::to_string(mp));
        B.emit({on, reg_ge(Em, 1), reg_ge(Emp, 1), atom({{Em, 1}, {Emp, -1}}, 1, Rel::le)}, {},
               {fx_xor(cmp, 1)}, OpCategory::compare, Bucket::s2);
        B.emit({reg_eq(cmp, 1)}, {}, {fx_add(Emp, -1)}, OpCategory::addsub, Bucket::s2);
      }
    }

    // ---- step 3: lookup rows, unused-index flag, pole validity ----
    {
      // distinct Q -> row count
      std::vector<std::pair<Momentum, int>> q_counts;
      for (const auto& row : blk.table.rows) {
        if (q_counts.empty() || q_counts.back().first != row.Q) q_counts.emplace_back(row.Q, 0);
        q_counts.back().second++;
      }
      for (const auto& [Q, cnt] : q_counts) {
        std::vector<LinearTest> tests{on};
        for (int j = 0; j < d; ++j)
          tests.push_back(reg_eq(Qr[static_cast<std::size_t>(j)], Q[static_cast<std::size_t>(j)]));
        B.emit(std::move(tests), {}, {fx_xor(nrows, cnt)}, OpCategory::controlled_set, Bucket::s3);
      }
      B.emit({on, atom({{il, 1}, {nrows, -1}}, 0, Rel::ge)}, {}, {fx_add(flag, 1)},
             OpCategory::compare, Bucket::s3);
      // The controlled-set sweep runs over every canonical in-box tuple, not
      // only those with reachable sums; out-of-window slots coincide with
      // flagged (i_low >= nrows) paths and their writes are uncomputed.
      const LookupTable padded = enumerate_rows(ix, model.cutoffs, model.particles, false);
      for (const auto& row : padded.rows) {
        std::vector<LinearTest> tests{on};
        for (int j = 0; j < d; ++j)
          tests.push_back(
              reg_eq(Qr[static_cast<std::size_t>(j)], row.Q[static_cast<std::size_t>(j)]));
        tests.push_back(reg_eq(il, row.i_low));
        std::vector<Effect> fx;
        for (int lg = 0; lg < g; ++lg)
          for (int j = 0; j < d; ++j)
            fx.push_back(fx_add(outn[static_cast<std::size_t>(lg)][static_cast<std::size_t>(j)],
                                row.outgoing[static_cast<std::size_t>(lg)][static_cast<std::size_t>(j)]));
        B.emit(std::move(tests), {}, std::move(fx), OpCategory::controlled_set, Bucket::s3);
      }
      // leg symbol -> axis-1 momentum register
      std::map<std::string, int> leg_reg;
      for (std::size_t p = 0; p < ix.outgoing.size(); ++p)
        leg_reg[ix.outgoing[p].second] = outn[p][0];
      for (std::size_t m = 0; m < ix.incoming.size(); ++m)
        leg_reg[ix.incoming[m].second] = nin[m][0];
      for (const auto& p : blk.poles) {
        std::vector<std::pair<int, long long>> terms;
        for (const auto& [sym, coeff] : p.terms) terms.emplace_back(leg_reg.at(sym), coeff);
        B.emit({on, atom(std::move(terms), p.constant, Rel::eq)}, {}, {fx_add(flag, 1)},
               OpCategory::compare, Bucket::s3);
      }
    }

    // ---- step 4: creations ----
    for (int lg = 0; lg < g; ++lg) {
      const int c = ix.outgoing[static_cast<std::size_t>(lg)].first;
      const bool fermionic = model.particles.is_fermionic(c);
      const int fnd = found[static_cast<std::size_t>(lg)];
      const int ps = pos[static_cast<std::size_t>(lg)];
      for (int r = 0; r < I; ++r) {
        std::vector<LinearTest> tests{on, reg_ne(B.c.out_occ[static_cast<std::size_t>(r)], 0),
                                      reg_eq(B.c.out_label[static_cast<std::size_t>(r)], c)};
        for (int j = 0; j < d; ++j)
          tests.push_back(
              regs_eq(B.c.out_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)],
                      outn[static_cast<std::size_t>(lg)][static_cast<std::size_t>(j)]));
        B.emit(std::move(tests), {}, {fx_xor(fnd, r + 1)}, OpCategory::controlled_set, Bucket::s4);
      }
      if (fermionic) {
        B.emit({on, reg_ne(fnd, 0)}, {}, {fx_add(flag, 1)}, OpCategory::compare, Bucket::s4);
      } else {
        for (int r = 0; r < I; ++r)
          B.emit({on, reg_eq(fnd, r + 1)}, {},
                 {fx_add(B.c.out_occ[static_cast<std::size_t>(r)], 1)}, OpCategory::addsub,
                 Bucket::s4);
        for (int r = 0; r < I; ++r)
          B.emit({on, reg_eq(fnd, r + 1),
                  reg_ge(B.c.out_occ[static_cast<std::size_t>(r)], W + 1)},
                 {}, {fx_add(flag, 1)}, OpCategory::compare, Bucket::s4);
      }
      B.emit({on, reg_eq(fnd, 0), reg_ne(B.c.out_occ[static_cast<std::size_t>(I - 1)], 0)}, {},
             {fx_add(flag, 1)}, OpCategory::compare, Bucket::s4);
      for (int r = 0; r < I; ++r) {
        KeyLessTest key;
        key.lhs_label_reg = B.c.out_label[static_cast<std::size_t>(r)];
        key.lhs_mom_regs = B.c.out_mom[static_cast<std::size_t>(r)];
        key.rhs_label = c;
        key.rhs_mom_regs = outn[static_cast<std::size_t>(lg)];
        B.emit({on, reg_eq(fnd, 0), reg_ne(B.c.out_occ[static_cast<std::size_t>(r)], 0)}, {key},
               {fx_add(ps, 1)}, OpCategory::compare, Bucket::s4);
      }
      B.emit({on, reg_eq(fnd, 0)}, {}, {fx_add(ps, 1)}, OpCategory::addsub, Bucket::s4);
      for (int j = I - 1; j >= 1; --j)
        B.emit({on, reg_eq(fnd, 0), reg_le(ps, j)}, {}, swap_regs(j - 1, j), OpCategory::swap,
               Bucket::s4);
      for (int r = 0; r < I; ++r) {
        std::vector<Effect> fx{fx_xor(B.c.out_label[static_cast<std::size_t>(r)], c)};
        for (int j = 0; j < d; ++j)
          fx.push_back(
              fx_addlin(B.c.out_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)],
                        {{outn[static_cast<std::size_t>(lg)][static_cast<std::size_t>(j)], 1}}));
        fx.push_back(fx_add(B.c.out_occ[static_cast<std::size_t>(r)], 1));
        B.emit({on, reg_eq(fnd, 0), reg_eq(ps, r + 1)}, {}, std::move(fx),
               OpCategory::controlled_set, Bucket::s4);
      }
    }

    // ---- duplicate-transition canonicality (tallied with step 1) ----
    // J-permutation rule: legs of one type are interchangeable, so a selector
    // multiset appears once per ordering and only the lexicographically
    // smallest raw-valid ordering is canonical. A pairwise inversion is
    // non-canonical when the swapped pair stays off every pole.
    for (std::size_t m = 0; m < ix.incoming.size(); ++m)
      for (std::size_t mp = m + 1; mp < ix.incoming.size(); ++mp) {
        if (ix.incoming[m].first != ix.incoming[mp].first) continue;
        std::vector<LinearTest> tests{on, atom({{J[m], 1}, {J[mp], -1}}, 0, Rel::gt)};
        for (const auto& p : blk.poles) {
          std::map<int, long long> swapped;
          for (const auto& [sym, coeff] : p.terms) {
            int reg = -1;
            if (sym == ix.incoming[m].second)
              reg = nin[mp][0];
            else if (sym == ix.incoming[mp].second)
              reg = nin[m][0];
            else {
              for (std::size_t pp = 0; pp < ix.outgoing.size(); ++pp)
                if (ix.outgoing[pp].second == sym) reg = outn[pp][0];
              for (std::size_t mm = 0; mm < ix.incoming.size(); ++mm)
                if (ix.incoming[mm].second == sym) reg = nin[mm][0];
            }
            swapped[reg] += coeff;
          }
          std::vector<std::pair<int, long long>> terms(swapped.begin(), swapped.end());
          tests.push_back(atom(std::move(terms), p.constant, Rel::ne));
        }
        B.emit(std::move(tests), {}, {fx_add(flag, 1)}, OpCategory::compare, Bucket::s1);
      }
    std::vector<int> A_cnt, Cat_cnt;
    if (shape.need_counts) {
      for (int r = 0; r < I; ++r) A_cnt.push_back(B.alloc(bp + "Acnt" + std::to_string(r)));
      for (int r = 0; r < I; ++r) Cat_cnt.push_back(B.alloc(bp + "Ccnt" + std::to_string(r)));
      for (int m = 0; m < h; ++m)
        for (int r = 0; r < I; ++r)
          B.emit({on, reg_eq(J[static_cast<std::size_t>(m)], r + 1)}, {},
                 {fx_add(A_cnt[static_cast<std::size_t>(r)], 1)}, OpCategory::addsub, Bucket::s1);
      for (int lg = 0; lg < g; ++lg)
        for (int r = 0; r < I; ++r) {
          std::vector<LinearTest> tests{
              on, reg_eq(B.c.in_label[static_cast<std::size_t>(r)],
                         ix.outgoing[static_cast<std::size_t>(lg)].first),
              reg_ne(B.c.in_occ[static_cast<std::size_t>(r)], 0)};
          for (int j = 0; j < d; ++j)
            tests.push_back(
                regs_eq(B.c.in_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)],
                        outn[static_cast<std::size_t>(lg)][static_cast<std::size_t>(j)]));
          B.emit(std::move(tests), {}, {fx_add(Cat_cnt[static_cast<std::size_t>(r)], 1)},
                 OpCategory::addsub, Bucket::s1);
        }
    }
    // Within-block rule: a cancelling annihilate+create pair sitting at
    // register r is non-canonical when an earlier same-type register r' has
    // spare occupancy and the moved assignment stays off every pole.
    for (int c : shape.x_types) {
      // The pole substitution needs an unambiguous moved leg pair.
      const bool subst_ok = shape.in_count.at(c) == 1 && shape.out_count.at(c) == 1;
      std::string in_sym, out_sym;
      if (subst_ok) {
        for (const auto& [code, sym] : ix.incoming)
          if (code == c) in_sym = sym;
        for (const auto& [code, sym] : ix.outgoing)
          if (code == c) out_sym = sym;
      }
      std::map<std::string, int> leg_reg;
      for (std::size_t p = 0; p < ix.outgoing.size(); ++p)
        leg_reg[ix.outgoing[p].second] = outn[p][0];
      for (std::size_t m = 0; m < ix.incoming.size(); ++m)
        leg_reg[ix.incoming[m].second] = nin[m][0];
      for (int r = 1; r < I; ++r)
        for (int rp = 0; rp < r; ++rp) {
          std::vector<LinearTest> tests{
              on,
              reg_eq(B.c.in_label[static_cast<std::size_t>(r)], c),
              reg_eq(B.c.in_label[static_cast<std::size_t>(rp)], c),
              reg_ge(A_cnt[static_cast<std::size_t>(r)], 1),
              reg_ge(Cat_cnt[static_cast<std::size_t>(r)], 1),
              atom({{B.c.in_occ[static_cast<std::size_t>(rp)], 1},
                    {A_cnt[static_cast<std::size_t>(rp)], -1}},
                   -1, Rel::ge)};
          if (subst_ok) {
            for (const auto& p : blk.poles) {
              std::map<int, long long> moved;
              for (const auto& [sym, coeff] : p.terms) {
                const int reg = (sym == in_sym || sym == out_sym)
                                    ? B.c.in_mom[static_cast<std::size_t>(rp)][0]
                                    : leg_reg.at(sym);
                moved[reg] += coeff;
              }
              std::vector<std::pair<int, long long>> terms(moved.begin(), moved.end());
              tests.push_back(atom(std::move(terms), p.constant, Rel::ne));
            }
          }
          B.emit(std::move(tests), {}, {fx_add(flag, 1)}, OpCategory::compare, Bucket::s1);
        }
    }
    // Cross-block rule: an earlier interaction with the same per-type particle
    // balance realizes the same transition when enough cancelling pairs fit.
    if (!shape.earlier_matches.empty()) {
      std::vector<int> Xtot, captot;
      for (int c = 0; c < model.particles.size(); ++c) {
        Xtot.push_back(B.alloc(bp + "Xtot" + std::to_string(c)));
        captot.push_back(B.alloc(bp + "cap" + std::to_string(c)));
      }
      for (int c = 0; c < model.particles.size(); ++c) {
        const int in_c = shape.in_count.count(c) ? shape.in_count.at(c) : 0;
        for (int r = 0; r < I; ++r) {
          const int ilab = B.c.in_label[static_cast<std::size_t>(r)];
          const int iocc = B.c.in_occ[static_cast<std::size_t>(r)];
          const int Ar = A_cnt[static_cast<std::size_t>(r)];
          const int Cr = Cat_cnt[static_cast<std::size_t>(r)];
          B.emit({on, reg_eq(ilab, c), reg_ne(iocc, 0), atom({{Ar, 1}, {Cr, -1}}, 0, Rel::le)}, {},
                 {fx_addlin(Xtot[static_cast<std::size_t>(c)], {{Ar, 1}})}, OpCategory::addsub,
                 Bucket::s1);
          B.emit({on, reg_eq(ilab, c), reg_ne(iocc, 0), atom({{Ar, 1}, {Cr, -1}}, -1, Rel::ge)}, {},
                 {fx_addlin(Xtot[static_cast<std::size_t>(c)], {{Cr, 1}})}, OpCategory::addsub,
                 Bucket::s1);
        }
        for (int r = 0; r < I; ++r)
          B.emit({on, reg_eq(B.c.in_label[static_cast<std::size_t>(r)], c),
                  reg_ne(B.c.in_occ[static_cast<std::size_t>(r)], 0)},
                 {},
                 {fx_addlin(captot[static_cast<std::size_t>(c)],
                            {{B.c.in_occ[static_cast<std::size_t>(r)], 1}})},
                 OpCategory::addsub, Bucket::s1);
        B.emit({on}, {},
               {fx_addlin(captot[static_cast<std::size_t>(c)],
                          {{Xtot[static_cast<std::size_t>(c)], 1}}, -in_c)},
               OpCategory::addsub, Bucket::s1);
      }
      for (std::size_t tp : shape.earlier_matches) {
        const BlockShape pshape = block_shape(model.interactions, tp, model.particles);
        std::vector<LinearTest> tests{on};
        for (int c = 0; c < model.particles.size(); ++c) {
          const long long in_c = shape.in_count.count(c) ? shape.in_count.at(c) : 0;
          const long long in_p =
              pshape.in_count.count(c) ? pshape.in_count.at(c) : 0;
          // x_c = in'_c - in_c + Xtot_c must be >= 0 and <= captot_c.
          tests.push_back(
              atom({{Xtot[static_cast<std::size_t>(c)], 1}}, in_p - in_c, Rel::ge));
          tests.push_back(atom({{captot[static_cast<std::size_t>(c)], 1},
                                {Xtot[static_cast<std::size_t>(c)], -1}},
                               in_c - in_p, Rel::ge));
        }
        B.emit(std::move(tests), {}, {fx_add(flag, 1)}, OpCategory::compare, Bucket::s1);
      }
    }
  }

  // ---- copy-out ----
  const std::size_t forward_end = B.c.ops.size();
  for (int r = 0; r < I; ++r) {
    std::vector<Effect> fx{fx_xorreg(B.c.res_label[static_cast<std::size_t>(r)],
                                     B.c.out_label[static_cast<std::size_t>(r)])};
    for (int j = 0; j < d; ++j)
      fx.push_back(fx_xorreg(B.c.res_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)],
                             B.c.out_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]));
    fx.push_back(fx_xorreg(B.c.res_occ[static_cast<std::size_t>(r)],
                           B.c.out_occ[static_cast<std::size_t>(r)]));
    B.emit({reg_eq(flag, 0)}, {}, std::move(fx), OpCategory::copy, Bucket::overhead);
  }
  for (int r = 0; r < I; ++r) {
    std::vector<Effect> fx{fx_xorreg(B.c.res_label[static_cast<std::size_t>(r)],
                                     B.c.in_label[static_cast<std::size_t>(r)])};
    for (int j = 0; j < d; ++j)
      fx.push_back(fx_xorreg(B.c.res_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)],
                             B.c.in_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]));
    fx.push_back(fx_xorreg(B.c.res_occ[static_cast<std::size_t>(r)],
                           B.c.in_occ[static_cast<std::size_t>(r)]));
    B.emit({reg_ne(flag, 0)}, {}, std::move(fx), OpCategory::copy, Bucket::overhead);
  }
  // One-based echo of the invalid index (0 stays reserved for "valid").
  B.emit({reg_ne(flag, 0)}, {}, {fx_addlin(B.c.a_out, {{i_reg, 1}}, 1)}, OpCategory::addsub,
         Bucket::overhead);

  // ---- uncompute: per-op inverses of the forward pass, in reverse order ----
  for (std::size_t idx = forward_end; idx-- > 0;) {
    Op inv = invert_op(B.c.ops[idx]);
    B.c.tally.uncompute++;
    B.c.tally.per_category[inv.category]++;
    B.c.ops.push_back(std::move(inv));
  }
  B.c.tally.total = static_cast<long long>(B.c.ops.size());
  return B.c;
}

// ---------------------------------------------------------------------------
// Interpreter
// ---------------------------------------------------------------------------

namespace {

bool eval_linear(const LinearTest& t, const RegisterSnapshot& snap) {
  long long v = t.constant;
  for (const auto& [reg, coeff] : t.terms) v += coeff * snap[static_cast<std::size_t>(reg)];
  switch (t.rel) {
    case Rel::eq: return v == 0;
    case Rel::ne: return v != 0;
    case Rel::lt: return v < 0;
    case Rel::le: return v <= 0;
    case Rel::gt: return v > 0;
    case Rel::ge: return v >= 0;
  }
  return false;
}

bool eval_keyless(const KeyLessTest& t, const RegisterSnapshot& snap) {
  const long long la = snap[static_cast<std::size_t>(t.lhs_label_reg)];
  if (la != t.rhs_label) return la < t.rhs_label;
  for (std::size_t j = 0; j < t.lhs_mom_regs.size(); ++j) {
    const long long a = snap[static_cast<std::size_t>(t.lhs_mom_regs[j])];
    const long long b = snap[static_cast<std::size_t>(t.rhs_mom_regs[j])];
    if (a != b) return a < b;
  }
  return false;
}

bool controls_hold(const Predicate& p, const RegisterSnapshot& snap) {
  for (const auto& t : p.tests)
    if (!eval_linear(t, snap)) return false;
  for (const auto& k : p.key_tests)
    if (!eval_keyless(k, snap)) return false;
  return true;
}

void apply_op(const Op& op, RegisterSnapshot& snap) {
  if (!controls_hold(op.controls, snap)) return;
  for (const auto& e : op.effects) {
    switch (e.kind) {
      case Effect::Kind::xor_const:
        snap[static_cast<std::size_t>(e.target)] ^= e.value;
        break;
      case Effect::Kind::xor_reg:
        snap[static_cast<std::size_t>(e.target)] ^= snap[static_cast<std::size_t>(e.source)];
        break;
      case Effect::Kind::add_const:
        snap[static_cast<std::size_t>(e.target)] += e.value;
        break;
      case Effect::Kind::add_lin: {
        long long v = e.value;
        for (const auto& [reg, coeff] : e.terms) v += coeff * snap[static_cast<std::size_t>(reg)];
        snap[static_cast<std::size_t>(e.target)] += v;
        break;
      }
      case Effect::Kind::swap:
        std::swap(snap[static_cast<std::size_t>(e.target)],
                  snap[static_cast<std::size_t>(e.source)]);
        break;
    }
  }
}

}  // namespace

RegisterSnapshot initial_snapshot(const LogLocalCircuit& circuit, const FockState& F,
                                  long long i) {
  if (i < 0 || i >= circuit.index_space_size)
    throw Error("circuit: index " + std::to_string(i) + " outside the index space");
  if (F.mode_count() > circuit.I)
    throw Error("circuit: state uses more mode registers than the layout provides");
  RegisterSnapshot snap(static_cast<std::size_t>(circuit.n_registers), 0);
  for (int r = 0; r < F.mode_count(); ++r) {
    const Mode& m = F.modes[static_cast<std::size_t>(r)];
    snap[static_cast<std::size_t>(circuit.in_label[static_cast<std::size_t>(r)])] = m.particle;
    for (int j = 0; j < circuit.dims; ++j)
      snap[static_cast<std::size_t>(
          circuit.in_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)])] =
          m.momentum[static_cast<std::size_t>(j)];
    snap[static_cast<std::size_t>(circuit.in_occ[static_cast<std::size_t>(r)])] = m.occupancy;
  }
  snap[static_cast<std::size_t>(circuit.i_reg)] = i;
  return snap;
}

void run_ops(const LogLocalCircuit& circuit, RegisterSnapshot& snap) {
  for (const auto& op : circuit.ops) apply_op(op, snap);
}

void run_inverse(const LogLocalCircuit& circuit, RegisterSnapshot& snap) {
  for (auto it = circuit.ops.rbegin(); it != circuit.ops.rend(); ++it)
    apply_op(invert_op(*it), snap);
}

CircuitResult circuit_execute(const LogLocalCircuit& circuit, const FockState& F, long long i) {
  RegisterSnapshot snap = initial_snapshot(circuit, F, i);
  run_ops(circuit, snap);

  CircuitResult res;
  auto read_state = [&](const std::vector<int>& label, const std::vector<std::vector<int>>& mom,
                        const std::vector<int>& occ) {
    FockState s;
    for (int r = 0; r < circuit.I; ++r) {
      const long long w = snap[static_cast<std::size_t>(occ[static_cast<std::size_t>(r)])];
      if (w == 0) continue;
      Mode m;
      m.particle = static_cast<int>(snap[static_cast<std::size_t>(label[static_cast<std::size_t>(r)])]);
      for (int j = 0; j < circuit.dims; ++j)
        m.momentum.push_back(static_cast<int>(snap[static_cast<std::size_t>(
            mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)])]));
      m.occupancy = static_cast<int>(w);
      s.modes.push_back(std::move(m));
    }
    return s;
  };
  res.f_in = read_state(circuit.in_label, circuit.in_mom, circuit.in_occ);
  res.f_prime = read_state(circuit.res_label, circuit.res_mom, circuit.res_occ);
  res.a_flag = snap[static_cast<std::size_t>(circuit.a_out)];

  // Everything except inputs and results must have returned to zero.
  std::set<int> persistent{circuit.i_reg, circuit.a_out};
  for (int r = 0; r < circuit.I; ++r) {
    persistent.insert(circuit.in_label[static_cast<std::size_t>(r)]);
    persistent.insert(circuit.in_occ[static_cast<std::size_t>(r)]);
    persistent.insert(circuit.res_label[static_cast<std::size_t>(r)]);
    persistent.insert(circuit.res_occ[static_cast<std::size_t>(r)]);
    for (int j = 0; j < circuit.dims; ++j) {
      persistent.insert(circuit.in_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]);
      persistent.insert(circuit.res_mom[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]);
    }
  }
  res.ancillas_clean = true;
  for (int reg = 0; reg < circuit.n_registers; ++reg)
    if (!persistent.count(reg) && snap[static_cast<std::size_t>(reg)] != 0) {
      res.ancillas_clean = false;
      break;
    }
  return res;
}

// ---------------------------------------------------------------------------
// Analytic gate tally
// ---------------------------------------------------------------------------

GateTally gate_count(const ModelSpec& model, const Cutoffs& cutoffs) {
  cutoffs.check();
  ModelSpec m = model;
  m.cutoffs = cutoffs;

  const long long I = cutoffs.register_count;
  const long long d = cutoffs.dims();
  const long long CT = m.particles.size();

  GateTally tally;
  for (std::size_t t = 0; t < m.interactions.size(); ++t) {
    const Interaction& ix = m.interactions[t];
    const long long g = ix.g();
    const long long h = ix.n_incoming();
    const InteractionCounts cnt = interaction_counts(ix, cutoffs, m.particles);
    const long long V = cnt.n_J;
    const long long R = cnt.n_box_tuples;
    const long long DQ = cnt.n_distinct_Q;
    const long long P = static_cast<long long>(extract_pole_predicates(ix, m).size());
    const BlockShape shape = block_shape(m.interactions, t, m.particles);
    const long long XT = static_cast<long long>(shape.x_types.size());
    const long long Tp = static_cast<long long>(shape.earlier_matches.size());

    long long dup = 0;
    for (std::size_t x = 0; x < ix.incoming.size(); ++x)
      for (std::size_t y = x + 1; y < ix.incoming.size(); ++y)
        if (ix.incoming[x].first == ix.incoming[y].first) ++dup;  // J-permutation rule
    if (shape.need_counts) dup += (h + g) * I;
    dup += XT * I * (I - 1) / 2;
    if (Tp > 0) dup += CT * (3 * I + 1);
    dup += Tp;
    tally.step1 += 2 + V + dup;

    tally.step2 += h * (I * (5 + 2 * d) + d) + h * (I - 1) + h * (h - 1);
    tally.step3 += DQ + 1 + R + P;
    for (const auto& [code, sym] : ix.outgoing)
      tally.step4 += m.particles.is_fermionic(code) ? 4 * I + 2 : 6 * I + 1;
  }
  const long long forward = tally.step1 + tally.step2 + tally.step3 + tally.step4;
  tally.uncompute = forward + 4 * I + 1;
  tally.total = forward + tally.uncompute;
  return tally;
}

}  // namespace fockforge
