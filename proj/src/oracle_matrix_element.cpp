#include "fockforge/oracle_matrix_element.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace fockforge {

double occupation_factor(const EnumTrace& trace) {
  double prod = 1.0;
  for (int w : trace.w_in) prod *= w;
  for (int w : trace.w_out) prod *= w;
  return std::sqrt(prod);
}

int fermion_parity(const ModelSpec& model, const Interaction& interaction,
                   const EnumTrace& trace) {
  int total = 0;
  for (std::size_t m = 0; m < interaction.incoming.size(); ++m)
    if (model.particles.is_fermionic(interaction.incoming[m].first))
      total += trace.parity_in[m];
  for (std::size_t p = 0; p < interaction.outgoing.size(); ++p)
    if (model.particles.is_fermionic(interaction.outgoing[p].first))
      total += trace.parity_out[p];
  return total % 2 == 0 ? 1 : -1;
}

double trace_value(const ModelOracle& oracle, const EnumTrace& trace) {
  if (trace.flag != 0) return 0.0;
  const Interaction& ix =
      oracle.blocks[static_cast<std::size_t>(trace.interaction_index)].interaction;
  const double beta = orientation_summed_coeff(oracle.model, ix, trace.incoming_momenta,
                                               trace.outgoing);
  return fermion_parity(oracle.model, ix, trace) * beta * occupation_factor(trace);
}

namespace {

// Mutable working state with fixed register positions; zero-occupancy entries
// stay in place so parity counting matches the application-order convention.
struct Working {
  std::vector<Mode> modes;

  int same_type_preceding(std::size_t pos, int particle) const {
    int n = 0;
    for (std::size_t r = 0; r < pos; ++r)
      if (modes[r].particle == particle) n += modes[r].occupancy;
    return n;
  }
};

struct AssignmentAccumulator {
  const ModelSpec& model;
  const Interaction& ix;
  const FockState& F;
  const FockState& Fp;
  MatrixElement out;

  // Ordered in-leg choices: mode index per incoming leg.
  void enumerate_in(std::vector<int>& ann_count, std::vector<std::size_t>& choice,
                    std::size_t m) {
    if (m == ix.incoming.size()) {
      finish_in(choice);
      return;
    }
    const int code = ix.incoming[m].first;
    for (std::size_t idx = 0; idx < F.modes.size(); ++idx) {
      if (F.modes[idx].particle != code) continue;
      if (ann_count[idx] >= F.modes[idx].occupancy) continue;
      ann_count[idx]++;
      choice[m] = idx;
      enumerate_in(ann_count, choice, m + 1);
      choice[m] = 0;
      ann_count[idx]--;
    }
  }

  void finish_in(const std::vector<std::size_t>& choice) {
    // Apply annihilations in incoming-leg order.
    Working work{F.modes};
    std::vector<int> w_in, parity_in;
    std::vector<Momentum> mom_in;
    for (std::size_t m = 0; m < choice.size(); ++m) {
      Mode& md = work.modes[choice[m]];
      parity_in.push_back(work.same_type_preceding(choice[m], md.particle));
      w_in.push_back(md.occupancy);
      mom_in.push_back(md.momentum);
      md.occupancy -= 1;
    }
    std::vector<Mode> packed;
    for (const auto& md : work.modes)
      if (md.occupancy > 0) packed.push_back(md);

    // Required creations = F' minus the intermediate state, per mode key.
    std::map<std::pair<int, Momentum>, int> need;
    for (const auto& md : Fp.modes) need[{md.particle, md.momentum}] += md.occupancy;
    for (const auto& md : packed) {
      auto it = need.find({md.particle, md.momentum});
      const int have = it == need.end() ? 0 : it->second;
      if (have < md.occupancy) return;  // the intermediate state overshoots F'
      if (have == md.occupancy)
        need.erase(it);
      else
        it->second = have - md.occupancy;
    }
    // Per-type multiset of momenta to create; counts must match the legs.
    std::map<int, std::vector<Momentum>> need_by_type;
    long long total_need = 0;
    for (const auto& [key, cnt] : need) {
      for (int k = 0; k < cnt; ++k) need_by_type[key.first].push_back(key.second);
      total_need += cnt;
    }
    if (total_need != static_cast<long long>(ix.outgoing.size())) return;
    std::map<int, std::vector<int>> out_positions;
    for (std::size_t p = 0; p < ix.outgoing.size(); ++p)
      out_positions[ix.outgoing[p].first].push_back(static_cast<int>(p));
    for (const auto& [code, positions] : out_positions) {
      auto it = need_by_type.find(code);
      if (it == need_by_type.end() || it->second.size() != positions.size()) return;
    }
    if (need_by_type.size() != out_positions.size()) return;

    // Ordered out-leg assignments: distinct permutations per type group.
    std::vector<std::vector<Momentum>> perms_per_group;
    std::vector<const std::vector<int>*> groups;
    for (auto& [code, moms] : need_by_type) {
      std::sort(moms.begin(), moms.end());
      groups.push_back(&out_positions.at(code));
      perms_per_group.push_back(moms);
    }
    std::vector<Momentum> assigned(ix.outgoing.size());
    std::function<void(std::size_t)> per_group = [&](std::size_t gi) {
      if (gi == groups.size()) {
        finish_out(w_in, parity_in, mom_in, packed, assigned);
        return;
      }
      std::vector<Momentum> perm = perms_per_group[gi];
      do {
        for (std::size_t k = 0; k < perm.size(); ++k)
          assigned[static_cast<std::size_t>((*groups[gi])[k])] = perm[k];
        per_group(gi + 1);
      } while (std::next_permutation(perm.begin(), perm.end()));
    };
    per_group(0);
  }

  void finish_out(const std::vector<int>& w_in, const std::vector<int>& parity_in,
                  const std::vector<Momentum>& mom_in, const std::vector<Mode>& packed,
                  const std::vector<Momentum>& assigned) {
    // Apply creations in outgoing-leg order.
    std::vector<Mode> work = packed;
    std::vector<int> w_out, parity_out;
    for (std::size_t p = 0; p < ix.outgoing.size(); ++p) {
      const int code = ix.outgoing[p].first;
      const Momentum& n = assigned[p];
      Mode probe{code, n, 1};
      std::size_t pos = 0;
      while (pos < work.size() && mode_key_less(work[pos], probe)) ++pos;
      const bool occupied =
          pos < work.size() && work[pos].particle == code && work[pos].momentum == n;
      int preceding = 0;
      for (std::size_t r = 0; r < pos; ++r)
        if (work[r].particle == code) preceding += work[r].occupancy;
      parity_out.push_back(preceding);
      if (occupied) {
        if (model.particles.is_fermionic(code)) return;
        if (work[pos].occupancy + 1 > model.cutoffs.occupancy_cap) return;
        work[pos].occupancy += 1;
        w_out.push_back(work[pos].occupancy);
      } else {
        if (static_cast<int>(work.size()) + 1 > model.cutoffs.register_count) return;
        work.insert(work.begin() + static_cast<std::ptrdiff_t>(pos), probe);
        w_out.push_back(1);
      }
    }

    std::map<std::string, double> legs;
    for (std::size_t p = 0; p < ix.outgoing.size(); ++p)
      legs[ix.outgoing[p].second] = assigned[p][0];
    for (std::size_t m = 0; m < ix.incoming.size(); ++m)
      legs[ix.incoming[m].second] = mom_in[m][0];
    double beta;
    try {
      beta = eval_coeff(ix.coeff, legs, model);
    } catch (const PoleError&) {
      return;
    } catch (const DomainError&) {
      return;
    }
    if (beta == 0.0) return;

    int parity = 0;
    for (std::size_t m = 0; m < ix.incoming.size(); ++m)
      if (model.particles.is_fermionic(ix.incoming[m].first)) parity += parity_in[m];
    for (std::size_t p = 0; p < ix.outgoing.size(); ++p)
      if (model.particles.is_fermionic(ix.outgoing[p].first)) parity += parity_out[p];
    double prod = 1.0;
    for (int w : w_in) prod *= w;
    for (int w : w_out) prod *= w;
    out.value += (parity % 2 == 0 ? 1 : -1) * beta * std::sqrt(prod);
    out.n_assignments += 1;
  }
};

}  // namespace

MatrixElement matrix_element(const ModelSpec& model, const FockState& F,
                             const FockState& F_prime) {
  if (model.cutoffs.dims() != 1)
    throw Error("matrix_element: coefficient evaluation supports d = 1 only");
  MatrixElement total;
  if (total_momentum(F, 1) != total_momentum(F_prime, 1)) return total;
  for (const auto& ix : model.interactions) {
    AssignmentAccumulator acc{model, ix, F, F_prime, {}};
    std::vector<int> ann_count(F.modes.size(), 0);
    std::vector<std::size_t> choice(ix.incoming.size(), 0);
    acc.enumerate_in(ann_count, choice, 0);
    total.value += acc.out.value;
    total.n_assignments += acc.out.n_assignments;
  }
  if (std::abs(total.value) < 1e-15) total.value = 0.0;
  return total;
}

long long exact_sparsity(const ModelOracle& oracle, const FockState& F) {
  long long n = 0;
  for (const auto& res : connected_states(oracle, F))
    if (matrix_element(oracle.model, F, res.f_prime).value != 0.0) ++n;
  return n;
}

}  // namespace fockforge
