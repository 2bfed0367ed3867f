#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fockforge/brute_force.hpp"
#include "fockforge/oracle_enumerator.hpp"
#include "fockforge/reference_walk.hpp"

using namespace fockforge;

namespace {

ModelSpec two_to_two_boson(int K) {
  ModelSpec m = parse_model(
      "model two_to_two\nparticle phi statistics=boson\n"
      "interaction scatter: out(phi:k, phi:l) in(phi:m, phi:n) coeff = 1\n");
  m.cutoffs = light_front_cutoffs(K);
  return m;
}

}  // namespace

TEST_CASE("reference 2->2 lookup table at K=5 is reproduced exactly") {
  const ModelSpec m = two_to_two_boson(5);
  const LookupTable table = build_lookup_table(m.interactions[0], m.cutoffs, m.particles);

  using Row = std::tuple<int, int, int, int>;  // (Q, i_low, out1, out2)
  std::vector<Row> got;
  for (const auto& r : table.rows)
    got.emplace_back(r.Q[0], r.i_low, r.outgoing[0][0], r.outgoing[1][0]);
  const std::vector<Row> expect = {
      {2, 0, 1, 1}, {3, 0, 2, 1}, {4, 0, 3, 1}, {4, 1, 2, 2}, {5, 0, 4, 1}, {5, 1, 3, 2}};
  CHECK(got == expect);
  CHECK(table.a == 2);
  CHECK(table.distinct_Q() == 4);
  CHECK(table.rows_for({4}) == 2);
  REQUIRE(table.find({4}, 1) != nullptr);
  CHECK(table.find({4}, 1)->outgoing == std::vector<Momentum>{{2}, {2}});
  CHECK(table.find({4}, 2) == nullptr);
  CHECK(table.find({6}, 0) == nullptr);
}

TEST_CASE("g=1 tables have one row per reachable Q") {
  const ModelSpec m = builtin("phi4-lf", light_front_cutoffs(6));
  const Interaction& fusion = m.interactions[3];
  REQUIRE(fusion.name == "fusion");
  const LookupTable t = build_lookup_table(fusion, m.cutoffs, m.particles);
  CHECK(t.a == 1);
  // Incoming sum of three momenta >= 3, capped at K.
  CHECK(t.distinct_Q() == 4);  // Q in {3,4,5,6}
  for (const auto& r : t.rows) CHECK(r.outgoing[0] == r.Q);
}

TEST_CASE("distinguishable boson+fermion pair rows order by decreasing momentum") {
  ModelSpec m = parse_model(
      "model pair\nparticle phi statistics=boson\nparticle psi statistics=fermion\n"
      "interaction mk: out(psi:k, phi:l) in(phi:m) coeff = 1\n");
  m.cutoffs = light_front_cutoffs(3);
  const LookupTable t = build_lookup_table(m.interactions[0], m.cutoffs, m.particles);
  std::vector<std::pair<int, int>> q3;
  for (const auto& r : t.rows)
    if (r.Q[0] == 3) q3.emplace_back(r.outgoing[0][0], r.outgoing[1][0]);
  CHECK(q3 == std::vector<std::pair<int, int>>{{2, 1}, {1, 2}});
}

TEST_CASE("fermionic groups exclude equal momenta") {
  ModelSpec m = parse_model(
      "model ff\nparticle psi statistics=fermion\nparticle phi statistics=boson\n"
      "interaction mk: out(psi:k, psi:l) in(phi:m) coeff = 1\n");
  m.cutoffs = light_front_cutoffs(4);
  const LookupTable t = build_lookup_table(m.interactions[0], m.cutoffs, m.particles);
  for (const auto& r : t.rows) CHECK(r.outgoing[0][0] > r.outgoing[1][0]);
  CHECK(t.rows_for({4}) == 1);  // only {3,1}; {2,2} is Pauli-excluded
}

TEST_CASE("analytic interaction_counts match materialized tables") {
  const std::vector<std::pair<std::string, Cutoffs>> cases = {
      {"phi4-lf", light_front_cutoffs(6)},
      {"phi4-et", equal_time_cutoffs(2, 5, 5)},
      {"yukawa-lf", light_front_cutoffs(4, 3)},
      {"yukawa-et", equal_time_cutoffs(2, 5, 5)},
      {"free-boson-lf", light_front_cutoffs(8)},
  };
  for (const auto& [name, co] : cases) {
    const ModelSpec m = builtin(name, co);
    for (const auto& ix : m.interactions) {
      CAPTURE(name);
      CAPTURE(ix.name);
      const LookupTable t = build_lookup_table(ix, co, m.particles);
      const InteractionCounts c = interaction_counts(ix, co, m.particles);
      CHECK(c.n_rows == static_cast<long long>(t.rows.size()));
      CHECK(c.a == t.a);
      CHECK(c.n_distinct_Q == t.distinct_Q());
      CHECK(c.index_space == index_space_size(ix, co, m.particles));
      CHECK(c.n_box_tuples >= c.n_rows);
    }
  }
}

TEST_CASE("number-operator model: every state maps to itself on its diagonal indices") {
  const ModelSpec m = builtin("free-boson-lf", light_front_cutoffs(4));
  const ModelOracle oracle = build_oracle(m);
  CHECK(oracle.index_space_size == m.cutoffs.register_count);
  for (const auto& F : enumerate_sector(m)) {
    const auto conn = connected_states(oracle, F);
    REQUIRE(conn.size() == 1);
    CHECK(conn[0].f_prime == F);
    CHECK(conn[0].a_flag == 0);
  }
}

TEST_CASE("vacuum under a pure-annihilation pair interaction connects to nothing") {
  ModelSpec m = parse_model(
      "model ann\nparticle phi statistics=boson\n"
      "interaction ann: out() in(phi:k, phi:l) coeff = 1\n");
  m.cutoffs = equal_time_cutoffs(1, 3, 2);
  const ModelOracle oracle = build_oracle(m);
  const FockState vacuum{};
  CHECK(connected_states(oracle, vacuum).empty());
  for (long long i = 0; i < oracle.index_space_size; ++i) {
    const EnumResult r = enumerate_semantic(oracle, vacuum, i);
    CHECK(r.a_flag == i + 1);  // never valid; one-based echo
    CHECK(r.f_prime == vacuum);
  }
}

TEST_CASE("semantic oracle: conservation, injectivity, flag discipline, completeness") {
  struct Case {
    std::string name;
    Cutoffs cutoffs;
  };
  const std::vector<Case> cases = {
      {"phi4-lf", light_front_cutoffs(5)},
      {"yukawa-lf", light_front_cutoffs(3, 3)},
      {"phi4-et", equal_time_cutoffs(1, 3, 2)},
      {"yukawa-et", equal_time_cutoffs(1, 4, 2)},
  };
  for (const auto& cs : cases) {
    CAPTURE(cs.name);
    const ModelSpec m = builtin(cs.name, cs.cutoffs);
    const ModelOracle oracle = build_oracle(m);
    for (const auto& F : enumerate_sector(m)) {
      const auto all = enumerate_all(oracle, F);
      REQUIRE(static_cast<long long>(all.size()) == oracle.index_space_size);

      std::set<FockState> valid_targets;
      for (long long i = 0; i < oracle.index_space_size; ++i) {
        const EnumResult& r = all[static_cast<std::size_t>(i)];
        CHECK(r.trace.i == i);
        if (r.a_flag == 0) {
          // Conservation + canonical validity + injectivity per F.
          CHECK(total_momentum(r.f_prime, m.cutoffs.dims()) ==
                total_momentum(F, m.cutoffs.dims()));
          CHECK(validate(r.f_prime, m.cutoffs, m.particles).empty());
          CHECK(valid_targets.insert(r.f_prime).second);
        } else {
          // Invalid index: flag echoes i + 1 and the state passes through.
          CHECK(r.a_flag == i + 1);
          CHECK(r.f_prime == F);
        }
      }

      // Completeness: every state with a nonzero summed matrix element has a
      // valid index. Soundness is per assignment, not per summed element: a
      // valid index may land on a target whose total element cancels across
      // interactions (e.g. fermion/antifermion emission amplitudes of equal
      // magnitude and opposite sign), so oracle-only extras are allowed iff
      // the summed element vanishes.
      std::map<FockState, double> brute_row;
      for (const auto& [state, amp] : bruteforce_row(m, F)) brute_row[state] = amp;
      std::set<FockState> brute_targets;
      for (const auto& [state, amp] : brute_row)
        if (std::abs(amp) > 1e-12) brute_targets.insert(state);
      for (const auto& s : brute_targets) CHECK(valid_targets.count(s) == 1);
      for (const auto& s : valid_targets)
        if (!brute_targets.count(s)) {
          const auto it = brute_row.find(s);
          CHECK((it == brute_row.end() || std::abs(it->second) <= 1e-12));
        }
    }
  }
}

TEST_CASE("enumerate_semantic agrees with enumerate_all") {
  const ModelSpec m = builtin("phi4-lf", light_front_cutoffs(4));
  const ModelOracle oracle = build_oracle(m);
  for (const auto& F : enumerate_sector(m)) {
    const auto all = enumerate_all(oracle, F);
    for (long long i = 0; i < oracle.index_space_size; ++i) {
      const EnumResult one = enumerate_semantic(oracle, F, i);
      CHECK(one.f_prime == all[static_cast<std::size_t>(i)].f_prime);
      CHECK(one.a_flag == all[static_cast<std::size_t>(i)].a_flag);
    }
  }
}

TEST_CASE("index space splits into per-interaction blocks of size n_J * a") {
  const ModelSpec m = builtin("phi4-lf", light_front_cutoffs(4));
  const ModelOracle oracle = build_oracle(m);
  long long expect_offset = 0;
  for (const auto& blk : oracle.blocks) {
    CHECK(blk.offset == expect_offset);
    CHECK(blk.index_space ==
          static_cast<long long>(blk.j_values.size()) * blk.table.a);
    expect_offset += blk.index_space;
  }
  CHECK(oracle.index_space_size == expect_offset);
  CHECK_THROWS_AS(enumerate_semantic(oracle, FockState{}, oracle.index_space_size), Error);
  CHECK_THROWS_AS(enumerate_semantic(oracle, FockState{}, -1), Error);
}
