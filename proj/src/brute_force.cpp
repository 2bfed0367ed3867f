#include "fockforge/brute_force.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace fockforge {

namespace {

// Position where the key (particle, momentum) sits or would be inserted.
std::size_t key_position(const FockState& state, int particle, const Momentum& momentum) {
  Mode probe{particle, momentum, 1};
  std::size_t i = 0;
  while (i < state.modes.size() && mode_key_less(state.modes[i], probe)) ++i;
  return i;
}

}  // namespace

int ladder_sign(const FockState& state, int particle, const Momentum& momentum,
                const ParticleRegistry& registry) {
  if (!registry.is_fermionic(particle)) return 1;
  const std::size_t pos = key_position(state, particle, momentum);
  int preceding = 0;
  for (std::size_t i = 0; i < pos; ++i)
    if (state.modes[i].particle == particle) preceding += state.modes[i].occupancy;
  return preceding % 2 == 0 ? 1 : -1;
}

StateAmplitudes apply_annihilation(const StateAmplitudes& in, int particle,
                                   const Momentum& momentum, const ModelSpec& model) {
  StateAmplitudes out;
  for (const auto& [state, amp] : in) {
    const std::size_t pos = key_position(state, particle, momentum);
    if (pos >= state.modes.size() || state.modes[pos].particle != particle ||
        state.modes[pos].momentum != momentum)
      continue;  // annihilating an empty mode
    const int w = state.modes[pos].occupancy;
    const int sign = ladder_sign(state, particle, momentum, model.particles);
    FockState next = state;
    if (w == 1)
      next.modes.erase(next.modes.begin() + static_cast<std::ptrdiff_t>(pos));
    else
      next.modes[pos].occupancy = w - 1;
    out[next] += amp * sign * std::sqrt(static_cast<double>(w));
  }
  return out;
}

StateAmplitudes apply_creation(const StateAmplitudes& in, int particle,
                               const Momentum& momentum, const ModelSpec& model) {
  const bool fermionic = model.particles.is_fermionic(particle);
  StateAmplitudes out;
  for (const auto& [state, amp] : in) {
    const std::size_t pos = key_position(state, particle, momentum);
    const bool occupied = pos < state.modes.size() &&
                          state.modes[pos].particle == particle &&
                          state.modes[pos].momentum == momentum;
    if (occupied && fermionic) continue;  // Pauli exclusion
    const int w_new = occupied ? state.modes[pos].occupancy + 1 : 1;
    if (w_new > model.cutoffs.occupancy_cap) continue;
    if (!occupied && state.mode_count() + 1 > model.cutoffs.register_count)
      continue;  // no mode register available
    const int sign = ladder_sign(state, particle, momentum, model.particles);
    FockState next = state;
    if (occupied)
      next.modes[pos].occupancy = w_new;
    else
      next.modes.insert(next.modes.begin() + static_cast<std::ptrdiff_t>(pos),
                        Mode{particle, momentum, 1});
    out[next] += amp * sign * std::sqrt(static_cast<double>(w_new));
  }
  return out;
}

namespace {

// Recursively assigns axis-1 momenta to legs; calls sink for each complete
// momentum-conserving assignment.
void assign_legs(const ModelSpec& model, const Interaction& ix, const FockState& F,
                 std::size_t leg_index, std::map<std::string, double>& legs,
                 std::vector<int>& values,
                 const std::function<void(const std::map<std::string, double>&,
                                          const std::vector<int>&)>& sink) {
  const int g = ix.g();
  const int f = ix.f();
  const auto [lo, hi] = model.cutoffs.per_dim.at(0);
  if (static_cast<int>(leg_index) == f) {
    int sum_out = 0;
    int sum_in = 0;
    for (int i = 0; i < f; ++i) (i < g ? sum_out : sum_in) += values[static_cast<std::size_t>(i)];
    if (sum_out == sum_in) sink(legs, values);
    return;
  }
  const bool is_out = static_cast<int>(leg_index) < g;
  const auto& leg = is_out ? ix.outgoing[leg_index] : ix.incoming[leg_index - static_cast<std::size_t>(g)];
  auto try_value = [&](int n) {
    values[leg_index] = n;
    legs[leg.second] = n;
    assign_legs(model, ix, F, leg_index + 1, legs, values, sink);
  };
  if (!is_out) {
    // Incoming legs can only act on modes occupied in F.
    for (const auto& m : F.modes)
      if (m.particle == leg.first) try_value(m.momentum.at(0));
    return;
  }
  for (int n = lo; n <= hi; ++n) try_value(n);
}

}  // namespace

StateAmplitudes bruteforce_row(const ModelSpec& model, const FockState& F) {
  if (model.cutoffs.dims() != 1)
    throw Error("bruteforce_row: coefficient evaluation supports d = 1 only");
  StateAmplitudes row;
  for (const auto& ix : model.interactions) {
    std::map<std::string, double> legs;
    std::vector<int> values(static_cast<std::size_t>(ix.f()), 0);
    auto sink = [&](const std::map<std::string, double>& legvals,
                    const std::vector<int>& vals) {
      double beta;
      try {
        beta = eval_coeff(ix.coeff, legvals, model);
      } catch (const PoleError&) {
        return;  // excluded assignment
      } catch (const DomainError&) {
        return;
      }
      if (beta == 0.0) return;
      StateAmplitudes s{{F, 1.0}};
      // Annihilations in listed incoming-leg order, then creations in listed
      // outgoing-leg order (the fixed convention shared with the trace path).
      for (int i = ix.g(); i < ix.f(); ++i) {
        s = apply_annihilation(s, ix.incoming[static_cast<std::size_t>(i - ix.g())].first,
                               Momentum{vals[static_cast<std::size_t>(i)]}, model);
        if (s.empty()) return;
      }
      for (int i = 0; i < ix.g(); ++i) {
        s = apply_creation(s, ix.outgoing[static_cast<std::size_t>(i)].first,
                           Momentum{vals[static_cast<std::size_t>(i)]}, model);
        if (s.empty()) return;
      }
      for (const auto& [state, amp] : s) row[state] += beta * amp;
    };
    assign_legs(model, ix, F, 0, legs, values, sink);
  }
  // Drop entries that cancel to numerical zero.
  for (auto it = row.begin(); it != row.end();) {
    if (std::abs(it->second) < 1e-15)
      it = row.erase(it);
    else
      ++it;
  }
  return row;
}

double matrix_element_bruteforce(const ModelSpec& model, const FockState& F,
                                 const FockState& F_prime) {
  const StateAmplitudes row = bruteforce_row(model, F);
  auto it = row.find(F_prime);
  return it == row.end() ? 0.0 : it->second;
}

}  // namespace fockforge
