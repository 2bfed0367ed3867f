#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fockforge/model_spec.hpp"

using namespace fockforge;

namespace {

const double kPi = 3.14159265358979323846;

const Interaction& find_interaction(const ModelSpec& m, const std::string& name) {
  for (const auto& ix : m.interactions)
    if (ix.name == name) return ix;
  throw Error("no interaction " + name);
}

}  // namespace

TEST_CASE("builtin shapes") {
  const Cutoffs lf = light_front_cutoffs(4);
  const Cutoffs et = equal_time_cutoffs(2, 4, 4);

  const ModelSpec fb = builtin("free-boson-lf", lf);
  CHECK(fb.particles.size() == 1);
  REQUIRE(fb.interactions.size() == 1);
  CHECK(fb.interactions[0].f() == 2);
  CHECK(fb.interactions[0].g() == 1);

  const ModelSpec ff = builtin("free-fermion-lf", lf);
  CHECK(ff.particles.size() == 2);
  CHECK(ff.interactions.size() == 2);

  const ModelSpec p4 = builtin("phi4-lf", lf);
  CHECK(p4.particles.size() == 1);
  REQUIRE(p4.interactions.size() == 4);
  CHECK(find_interaction(p4, "fission").g() == 3);
  CHECK(find_interaction(p4, "fission").n_incoming() == 1);
  CHECK(find_interaction(p4, "fusion").g() == 1);
  CHECK(find_interaction(p4, "fusion").n_incoming() == 3);
  CHECK(find_interaction(p4, "scatter").f() == 4);

  const ModelSpec p4et = builtin("phi4-et", et);
  REQUIRE(p4et.interactions.size() == 7);
  CHECK(find_interaction(p4et, "create4").n_incoming() == 0);
  CHECK(find_interaction(p4et, "annihilate4").g() == 0);

  const ModelSpec yk = builtin("yukawa-lf", lf);
  CHECK(yk.particles.size() == 3);
  CHECK(yk.interactions.size() == 16);
  CHECK(yk.particles.is_fermionic(yk.particles.find("b")));
  CHECK(yk.particles.is_fermionic(yk.particles.find("d")));
  CHECK(!yk.particles.is_fermionic(yk.particles.find("a")));

  const ModelSpec yket = builtin("yukawa-et", et);
  CHECK(yket.interactions.size() == 8);

  CHECK_THROWS_AS(builtin("nope", lf), Error);
  CHECK_THROWS_AS(builtin("phi4-lf", lf, {{"nosuch", 1.0}}), Error);
  CHECK(builtin("phi4-lf", lf, {{"lambda", 2.5}}).param("lambda") == 2.5);
}

TEST_CASE("print/parse is a fixed point for every builtin") {
  for (const auto& name : builtin_names()) {
    const ModelSpec m = builtin(name, light_front_cutoffs(4));
    const std::string text = print_model(m);
    const ModelSpec reparsed = parse_model(text);
    CHECK(structurally_equal(m, reparsed));
    CHECK(print_model(reparsed) == text);  // string fixed point
  }
}

TEST_CASE("coefficient evaluation matches closed forms") {
  const ModelSpec p4 = builtin("phi4-lf", light_front_cutoffs(2));
  const auto& scatter = find_interaction(p4, "scatter");
  const std::map<std::string, double> unit_legs{{"k", 1}, {"l", 1}, {"m", 1}, {"n", 1}};
  CHECK(eval_coeff(scatter.coeff, unit_legs, p4) ==
        doctest::Approx(1.0 / (16.0 * kPi)).epsilon(1e-14));

  // Free term: (1/n)(m^2 + lambda/(4 pi) * 1/2 * sum_{k=1..K} 1/k) at K=2.
  const auto& free = find_interaction(p4, "free");
  CHECK(eval_coeff(free.coeff, {{"n", 2.0}, {"np", 2.0}}, p4) ==
        doctest::Approx(0.5 * (1.0 + (1.0 / (4.0 * kPi)) * 0.5 * 1.5)).epsilon(1e-14));

  const ModelSpec fbet = builtin("free-boson-et", equal_time_cutoffs(2, 4, 4));
  CHECK(eval_coeff(fbet.interactions[0].coeff, {{"n", 3.0}, {"np", 3.0}}, fbet) ==
        doctest::Approx(1.0 / std::sqrt(10.0)).epsilon(1e-14));  // omega(3), m=1

  // Named spinor contractions default to 1.
  const ModelSpec yket = builtin("yukawa-et", equal_time_cutoffs(2, 4, 4));
  const auto& absorb = find_interaction(yket, "absorb_f");
  const double w1 = std::sqrt(2.0), w2 = std::sqrt(5.0);
  CHECK(eval_coeff(absorb.coeff, {{"l", 1.0}, {"k", 2.0}, {"p", -1.0}}, yket) ==
        doctest::Approx(1.0 / std::sqrt(8.0 * w2 * w1 * w1)).epsilon(1e-14));
}

TEST_CASE("pole and domain errors") {
  const ModelSpec yk = builtin("yukawa-lf", light_front_cutoffs(4));
  const auto& pair_ann = find_interaction(yk, "vertex_pair_annihilate");
  // coeff = 2 g m_F / ((k - m) sqrt(m)); k == m hits the pole.
  CHECK_THROWS_AS(eval_coeff(pair_ann.coeff, {{"k", 2.0}, {"l", 2.0}, {"m", 2.0}}, yk),
                  PoleError);
  CHECK(eval_coeff(pair_ann.coeff, {{"k", 3.0}, {"l", 1.0}, {"m", 4.0}}, yk) ==
        doctest::Approx(2.0 / (-1.0 * 2.0)).epsilon(1e-14));

  const ModelSpec empty = parse_model("model t\nparam x = -1\nparticle phi statistics=boson\n"
                                      "interaction i: out(phi:a) in(phi:b) coeff = sqrt(x)\n");
  CHECK_THROWS_AS(eval_coeff(empty.interactions[0].coeff, {{"a", 1.0}, {"b", 1.0}}, empty),
                  DomainError);
}

TEST_CASE("affine pole predicates") {
  const ModelSpec yk = builtin("yukawa-lf", light_front_cutoffs(4));
  const auto pair_poles = extract_pole_predicates(find_interaction(yk, "vertex_pair_annihilate"), yk);
  REQUIRE(pair_poles.size() == 1);  // k - m = 0
  std::map<std::string, int> coeffs(pair_poles[0].terms.begin(), pair_poles[0].terms.end());
  CHECK(coeffs.at("k") * coeffs.at("m") == -1);
  CHECK(pair_poles[0].constant == 0);

  const auto seagull_poles = extract_pole_predicates(find_interaction(yk, "seagull_f"), yk);
  CHECK(seagull_poles.size() == 1);  // k - n = 0

  // Light-front momenta are positive, so k + l never vanishes, but the
  // predicate is still the literal denominator zero set.
  const ModelSpec p4 = builtin("phi4-lf", light_front_cutoffs(4));
  for (const auto& p : extract_pole_predicates(find_interaction(p4, "scatter"), p4))
    CHECK(!p.terms.empty());
}

TEST_CASE("hermitian closure holds for builtins and flags a lopsided model") {
  for (const auto& name : builtin_names()) {
    const ModelSpec m = builtin(name, name.size() > 2 && name.substr(name.size() - 2) == "et"
                                          ? equal_time_cutoffs(2, 4, 4)
                                          : light_front_cutoffs(4));
    CHECK_MESSAGE(hermitian_closure_warnings(m).empty(), name);
  }
  const ModelSpec lop = parse_model(
      "model lop\nparam g = 1\nparticle phi statistics=boson\n"
      "interaction split: out(phi:a, phi:b) in(phi:c) coeff = g\n");
  ModelSpec lop2 = lop;
  lop2.cutoffs = light_front_cutoffs(4);
  CHECK(!hermitian_closure_warnings(lop2).empty());
}

TEST_CASE("malformed model texts raise positioned parse errors") {
  const std::vector<std::string> bad = {
      "model",                                             // 1: missing name
      "model m\nparticle",                                 // 2: missing particle name
      "model m\nparticle phi",                             // 3: missing statistics
      "model m\nparticle phi statistics=strange\n",        // 4: unknown statistics
      "model m\nparticle phi statistics boson\n",          // 5: missing '='
      "model m\nparam x\n",                                // 6: missing '= value'
      "model m\nparam x = oops\n",                         // 7: not a number
      "model m\nwibble\n",                                 // 8: unknown keyword
      "model m\nparticle phi statistics=boson\ninteraction\n",  // 9: missing name
      "model m\nparticle phi statistics=boson\n"
      "interaction i out(phi:a) in(phi:b) coeff = 1\n",    // 10: missing ':'
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(psi:a) in(phi:b) coeff = 1\n",   // 11: unknown particle
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi) in(phi:b) coeff = 1\n",     // 12: leg without symbol
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a) in(phi:b)\n",             // 13: missing coeff
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a) in(phi:b) coeff 1\n",     // 14: missing '='
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a) in(phi:b) coeff =\n",     // 15: empty expression
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a) in(phi:b) coeff = (1\n",  // 16: unbalanced '('
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a) in(phi:b) coeff = 1 +\n",  // 17: dangling operator
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a) in(phi:b) coeff = sqrt 2\n",  // 18: sqrt needs '('
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a) in(phi:b) coeff = sum(1/q)\n",  // 19: sum needs dummy
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a) in(phi:b) coeff = a^b\n",  // 20: non-integer power
      "model m\nparticle phi statistics=boson\n"
      "interaction i: out(phi:a, in(phi:b) coeff = 1\n",   // 21: broken leg list
      "model m\nparticle phi statistics=boson\nparticle phi statistics=boson\n",  // 22: dup
  };
  int case_no = 0;
  for (const auto& text : bad) {
    ++case_no;
    CAPTURE(case_no);
    bool threw = false;
    try {
      parse_model(text);
    } catch (const ParseError& e) {
      threw = true;
      CHECK(e.line >= 1);
      CHECK(e.col >= 1);
      CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
    CHECK_MESSAGE(threw, "case ", case_no, " did not raise ParseError");
  }

  // Position points at the offending line.
  try {
    parse_model("model m\nparticle phi statistics=boson\nwibble\n");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }
}
