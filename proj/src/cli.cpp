#include "fockforge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fockforge/brute_force.hpp"
#include "fockforge/oracle_enumerator.hpp"
#include "fockforge/oracle_matrix_element.hpp"
#include "fockforge/reference_walk.hpp"
#include "fockforge/resource_estimator.hpp"

namespace fockforge {

SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points,
                   double window_fraction) {
  if (points.size() < 4) throw Error("fit_slope: need at least 4 points");
  SlopeFit fit;
  fit.points = points;
  std::sort(fit.points.begin(), fit.points.end());
  for (const auto& [K, count] : fit.points)
    if (K <= 0.0 || count <= 0.0) throw Error("fit_slope: nonpositive point");
  if (fit.points.front().first == fit.points.back().first)
    throw Error("fit_slope: degenerate series (constant K)");

  const std::size_t n = fit.points.size();
  const auto start = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * (1.0 - window_fraction)));
  for (std::size_t i = std::min(start, n - 2); i < n; ++i)
    fit.window.emplace_back(std::log(fit.points[i].first), std::log(fit.points[i].second));

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(fit.window.size());
  for (const auto& [x, y] : fit.window) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) throw Error("fit_slope: degenerate window");
  fit.slope = (m * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / m;
  double ss = 0;
  for (const auto& [x, y] : fit.window) {
    const double r = y - (fit.slope * x + fit.intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

FockState parse_state_literal(const std::string& text, const ParticleRegistry& registry) {
  std::vector<Mode> modes;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  skip_ws();
  while (pos < text.size()) {
    if (text[pos] != '(')
      throw Error("state literal: expected '(' at position " + std::to_string(pos));
    const std::size_t close = text.find(')', pos);
    if (close == std::string::npos)
      throw Error("state literal: unterminated tuple at position " + std::to_string(pos));
    const std::string tuple = text.substr(pos + 1, close - pos - 1);
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : tuple) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 3)
      throw Error("state literal: tuple needs (species,momentum,occupancy): (" + tuple + ")");
    auto trim = [](std::string s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
      return s;
    };
    const std::string name = trim(fields[0]);
    const int code = registry.find(name);
    if (code < 0) throw Error("state literal: unknown species '" + name + "'");
    Momentum mom;
    std::stringstream ms(trim(fields[1]));
    std::string comp;
    while (std::getline(ms, comp, ';')) mom.push_back(std::stoi(trim(comp)));
    const int occ = std::stoi(trim(fields[2]));
    modes.push_back(Mode{code, mom, occ});
    pos = close + 1;
    skip_ws();
  }
  if (modes.empty()) throw Error("state literal: empty state");
  return canonicalize(std::move(modes));
}

std::string state_literal(const FockState& state, const ParticleRegistry& registry) {
  std::ostringstream os;
  for (const auto& m : state.modes) {
    os << "(" << registry.at(m.particle).name << ",";
    for (std::size_t j = 0; j < m.momentum.size(); ++j)
      os << (j ? ";" : "") << m.momentum[j];
    os << "," << m.occupancy << ")";
  }
  return os.str();
}

ModelSpec load_model(const std::string& source, int K,
                     const std::map<std::string, double>& param_overrides,
                     int lambda_override, int I_override, int W_override) {
  std::string name = source;
  std::string text;
  bool is_builtin = false;
  if (name.rfind("builtin:", 0) == 0) {
    name = name.substr(8);
    is_builtin = true;
  }
  const auto& names = builtin_names();
  if (!is_builtin && std::find(names.begin(), names.end(), name) != names.end())
    is_builtin = true;

  // Equal time when the builtin says so or an explicit Lambda was given.
  const bool equal_time =
      (is_builtin && name.size() >= 3 && name.substr(name.size() - 3) == "-et") ||
      lambda_override >= 0;

  ModelSpec parsed;
  int n_species = 1;
  if (is_builtin) {
    // Parse once with placeholder cutoffs to learn the species count.
    parsed = builtin(name, light_front_cutoffs(std::max(K, 1)));
    n_species = parsed.particles.size();
  } else {
    std::ifstream in(name);
    if (!in) throw Error("cannot read model file: " + name);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
    parsed = parse_model(text);
    n_species = parsed.particles.size();
  }

  Cutoffs co;
  if (equal_time) {
    const int lambda = lambda_override >= 0 ? lambda_override : (K + 1) / 2 - 1;
    const int I = I_override >= 0 ? I_override : K;
    const int W = W_override >= 0 ? W_override : K;
    co = equal_time_cutoffs(lambda, I, W);
  } else {
    co = light_front_cutoffs(K, n_species);
    if (I_override >= 0) co.register_count = I_override;
    if (W_override >= 0) co.occupancy_cap = W_override;
  }

  if (is_builtin) return builtin(name, co, param_overrides);
  parsed.cutoffs = co;
  co.check();
  for (const auto& [key, value] : param_overrides) {
    if (!parsed.params.count(key)) throw Error("unknown parameter override: " + key);
    parsed.params[key] = value;
  }
  return parsed;
}

namespace {

std::map<std::string, double> parse_param_overrides(const std::vector<std::string>& raw) {
  std::map<std::string, double> out;
  for (const auto& kv : raw) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--param expects name=value: " + kv);
    out[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
  }
  return out;
}

std::vector<int> parse_k_spec(const std::string& spec) {
  std::vector<int> ks;
  const auto dots = spec.find("..");
  if (dots != std::string::npos) {
    const int a = std::stoi(spec.substr(0, dots));
    const int b = std::stoi(spec.substr(dots + 2));
    if (a <= 0 || b < a) throw Error("bad K range: " + spec);
    for (int k = a; k <= b; k *= 2) ks.push_back(k);  // doubling grid
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) ks.push_back(std::stoi(tok));
  }
  if (ks.empty()) throw Error("empty K list: " + spec);
  return ks;
}

std::ostream& full_precision(std::ostream& os) {
  os << std::setprecision(17);
  return os;
}

struct Common {
  std::string model = "builtin:phi4-lf";
  int K = 4;
  std::vector<std::string> params;
  int lambda_override = -1, I_override = -1, W_override = -1;
  long long seed = 0;  // echoed for reproducibility; no randomized paths yet

  void attach(CLI::App* app, bool with_k = true) {
    app->add_option("--model", model, "builtin:NAME or model file path");
    if (with_k) app->add_option("--K", K, "harmonic resolution / lattice scale");
    app->add_option("--param", params, "parameter override name=value (repeatable)");
    app->add_option("--Lambda", lambda_override, "equal-time momentum cutoff override");
    app->add_option("--I", I_override, "mode-register count override");
    app->add_option("--W", W_override, "occupancy cap override");
    app->add_option("--seed", seed, "seed echoed into outputs");
  }

  ModelSpec load() const {
    return load_model(model, K, parse_param_overrides(params), lambda_override, I_override,
                      W_override);
  }
};

int cmd_encode(const Common& c, const std::string& state_arg) {
  const ModelSpec m = c.load();
  const FockState F = parse_state_literal(state_arg, m.particles);
  const auto problems = validate(F, m.cutoffs, m.particles);
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << "invalid state: " << p << "\n";
    return 3;
  }
  const BitLayout layout = make_layout(m.cutoffs, m.particles.label_bits());
  std::cout << "state:        " << state_literal(F, m.particles) << "\n";
  std::cout << "hex:          " << to_hex(encode(F, layout)) << "\n";
  std::cout << "bits/mode:    " << layout.bits_per_mode << " (label " << layout.bits_label
            << ", momentum " << layout.bits_momentum << ", occupancy "
            << layout.bits_occupancy << ")\n";
  std::cout << "bits total:   " << layout.bits_total << "\n";
  std::cout << "qubits (asymptotic occupancy width): " << layout.bits_total_reported << "\n";
  return 0;
}

int cmd_decode(const Common& c, const std::string& hex) {
  const ModelSpec m = c.load();
  const BitLayout layout = make_layout(m.cutoffs, m.particles.label_bits());
  const FockState F = decode(from_hex(hex), layout);
  std::cout << state_literal(F, m.particles) << "\n";
  return 0;
}

int cmd_enumerate(const Common& c, const std::string& state_arg, long long i) {
  const ModelSpec m = c.load();
  const FockState F = parse_state_literal(state_arg, m.particles);
  const auto problems = validate(F, m.cutoffs, m.particles);
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << "invalid state: " << p << "\n";
    return 3;
  }
  const ModelOracle oracle = build_oracle(m);
  std::cout << "index space size: " << oracle.index_space_size << "\n";
  if (i < 0) {
    for (const auto& res : connected_states(oracle, F))
      std::cout << "i=" << res.trace.i << "  F'=" << state_literal(res.f_prime, m.particles)
                << "  interaction="
                << oracle.blocks[static_cast<std::size_t>(res.trace.interaction_index)]
                       .interaction.name
                << "\n";
    return 0;
  }
  const EnumResult res = enumerate_semantic(oracle, F, i);
  std::cout << "F':   " << state_literal(res.f_prime, m.particles) << "\n";
  std::cout << "a:    " << res.a_flag << (res.a_flag == 0 ? " (valid)" : " (invalid)") << "\n";
  const EnumTrace& tr = res.trace;
  std::cout << "trace: interaction="
            << oracle.blocks[static_cast<std::size_t>(tr.interaction_index)].interaction.name
            << " i_high=" << tr.i_high << " i_low=" << tr.i_low << " J=[";
  for (std::size_t k = 0; k < tr.J.size(); ++k) std::cout << (k ? "," : "") << tr.J[k];
  std::cout << "] Q=[";
  for (std::size_t k = 0; k < tr.Q.size(); ++k) std::cout << (k ? "," : "") << tr.Q[k];
  std::cout << "]";
  if (tr.flag != 0) std::cout << " flagged: " << tr.flag_reason;
  std::cout << "\n";
  return 0;
}

int cmd_matelem(const Common& c, const std::string& from, const std::string& to) {
  const ModelSpec m = c.load();
  const FockState F = parse_state_literal(from, m.particles);
  const FockState Fp = parse_state_literal(to, m.particles);
  const MatrixElement me = matrix_element(m, F, Fp);
  std::cout << full_precision << "<F'|H|F> = " << me.value << "  (" << me.n_assignments
            << " assignments)\n";
  return 0;
}

int cmd_build_matrix(const Common& c, const std::string& csv_path) {
  const ModelSpec m = c.load();
  const auto basis = enumerate_sector(m);
  const Eigen::MatrixXd H = build_dense(m, basis);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!csv_path.empty()) {
    file.open(csv_path);
    if (!file) throw Error("cannot write: " + csv_path);
    os = &file;
  }
  *os << full_precision;
  *os << "# basis (" << basis.size() << " states)\n";
  for (std::size_t i = 0; i < basis.size(); ++i)
    *os << "# " << i << ": " << state_literal(basis[i], m.particles) << "\n";
  *os << "row,col,value\n";
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    for (Eigen::Index j = 0; j < H.cols(); ++j)
      if (H(i, j) != 0.0) *os << i << "," << j << "," << H(i, j) << "\n";
  return 0;
}

int cmd_sparsity(const Common& c) {
  const ModelSpec m = c.load();
  const auto basis = enumerate_sector(m);
  const ModelOracle oracle = build_oracle(m);
  long long max_sparsity = 0;
  for (const auto& F : basis) {
    const long long s = exact_sparsity(oracle, F);
    max_sparsity = std::max(max_sparsity, s);
    std::cout << state_literal(F, m.particles) << "  sparsity=" << s << "\n";
  }
  std::cout << "max sparsity:   " << max_sparsity << "\n";
  std::cout << "sparsity bound: " << sparsity_bound(m) << "\n";
  return 0;
}

int cmd_gatecount(const Common& c, const std::string& k_spec, const std::string& csv_path) {
  std::vector<std::pair<double, double>> points;
  std::ostringstream csv;
  csv << "K,step1_ops,step2_ops,step3_ops,step4_ops,uncompute_ops,total\n";
  for (int K : parse_k_spec(k_spec)) {
    Common ck = c;
    ck.K = K;
    const ModelSpec m = ck.load();
    const GateTally tally = gate_count(m, m.cutoffs);
    csv << K << "," << tally.step1 << "," << tally.step2 << "," << tally.step3 << ","
        << tally.step4 << "," << tally.uncompute << "," << tally.total << "\n";
    points.emplace_back(K, static_cast<double>(tally.total));
  }
  if (!csv_path.empty()) {
    std::ofstream file(csv_path);
    if (!file) throw Error("cannot write: " + csv_path);
    file << csv.str();
  }
  std::cout << csv.str();
  if (points.size() >= 4) {
    const SlopeFit fit = fit_slope(points);
    std::cout << full_precision << "fitted slope (top-half window): " << fit.slope
              << " (rms residual " << fit.residual << ")\n";
  }
  return 0;
}

int cmd_walk_check(const Common& c) {
  const ModelSpec m = c.load();
  const WalkCheck chk = verify_walk(m);
  std::cout << full_precision;
  std::cout << "basis size:        " << chk.basis_size << "\n";
  std::cout << "index space k:     " << chk.k << "\n";
  std::cout << "||H||_1:           " << chk.h_one_norm << "\n";
  std::cout << "||H||_max:         " << chk.h_max_norm << "\n";
  std::cout << "r:                 " << chk.r << "\n";
  std::cout << "max |T col norm-1|: " << chk.max_unitarity_dev << "\n";
  std::cout << "max overlap dev:    " << chk.max_overlap_dev << "\n";
  return 0;
}

int cmd_estimate(const Common& c, double t, double eps, bool time_dependent, double h_max) {
  const ModelSpec m = c.load();
  if (h_max <= 0.0) {
    const auto basis = enumerate_sector(m);
    h_max = max_norm(build_dense(m, basis));
  }
  std::cout << to_string(estimate_resources(m, t, eps, h_max, time_dependent));
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"fockforge: compact-encoding oracle constructions for "
               "second-quantized Hamiltonians"};
  app.require_subcommand(1);

  Common c_encode, c_decode, c_enum, c_mat, c_matrix, c_sparsity, c_gate, c_walk, c_est;
  std::string state_arg, state2_arg, hex_arg, csv_path, k_spec = "8..128";
  long long index_arg = -1;
  double t_arg = 1.0, eps_arg = 1e-6, h_max_arg = 0.0;
  bool time_dependent = false;

  auto* encode = app.add_subcommand("encode", "encode a state literal to a bitstring");
  c_encode.attach(encode);
  encode->add_option("--state", state_arg, "state literal")->required();

  auto* decode = app.add_subcommand("decode", "decode a hex bitstring to a state literal");
  c_decode.attach(decode);
  decode->add_option("--hex", hex_arg, "hex bitstring")->required();

  auto* enumerate = app.add_subcommand("enumerate", "apply the enumerator oracle");
  c_enum.attach(enumerate);
  enumerate->add_option("--state", state_arg, "state literal")->required();
  enumerate->add_option("--i", index_arg, "index (omit to list all connected states)");

  auto* matelem = app.add_subcommand("matelem", "matrix element between two states");
  c_mat.attach(matelem);
  matelem->add_option("--state", state_arg, "source state literal")->required();
  matelem->add_option("--state2", state2_arg, "target state literal")->required();

  auto* build_matrix = app.add_subcommand("build-matrix", "dense sector Hamiltonian");
  c_matrix.attach(build_matrix);
  build_matrix->add_option("--csv", csv_path, "CSV output path");

  auto* sparsity = app.add_subcommand("sparsity", "per-state exact sparsity and the bound");
  c_sparsity.attach(sparsity);

  auto* gatecount = app.add_subcommand("gatecount", "analytic gate tallies over a K grid");
  c_gate.attach(gatecount, /*with_k=*/false);
  gatecount->add_option("--K", k_spec, "K grid: a..b (doubling) or comma list");
  gatecount->add_option("--csv", csv_path, "CSV output path");

  auto* walk_check = app.add_subcommand("walk-check", "verify the walk isometry");
  c_walk.attach(walk_check);

  auto* estimate = app.add_subcommand("estimate", "closed-form resource report");
  c_est.attach(estimate);
  estimate->add_option("--t", t_arg, "evolution time");
  estimate->add_option("--eps", eps_arg, "target error");
  estimate->add_option("--H-max", h_max_arg, "max |matrix element| (computed if omitted)");
  estimate->add_flag("--time-dependent", time_dependent, "use the time-dependent query formula");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (encode->parsed()) return cmd_encode(c_encode, state_arg);
    if (decode->parsed()) return cmd_decode(c_decode, hex_arg);
    if (enumerate->parsed()) return cmd_enumerate(c_enum, state_arg, index_arg);
    if (matelem->parsed()) return cmd_matelem(c_mat, state_arg, state2_arg);
    if (build_matrix->parsed()) return cmd_build_matrix(c_matrix, csv_path);
    if (sparsity->parsed()) return cmd_sparsity(c_sparsity);
    if (gatecount->parsed()) return cmd_gatecount(c_gate, k_spec, csv_path);
    if (walk_check->parsed()) return cmd_walk_check(c_walk);
    if (estimate->parsed())
      return cmd_estimate(c_est, t_arg, eps_arg, time_dependent, h_max_arg);
  } catch (const CapExceededError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace fockforge
