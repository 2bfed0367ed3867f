#include "fockforge/reference_walk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>

#include "fockforge/brute_force.hpp"

namespace fockforge {

namespace {

long long sector_cap() {
  if (const char* env = std::getenv("FOCKFORGE_SECTOR_CAP")) {
    try {
      return std::stoll(env);
    } catch (...) {
      throw Error("FOCKFORGE_SECTOR_CAP is not an integer");
    }
  }
  return 20000;
}

}  // namespace

std::vector<FockState> enumerate_sector(const ModelSpec& model,
                                        std::optional<int> required_total) {
  const Cutoffs& co = model.cutoffs;
  if (co.dims() != 1) throw Error("enumerate_sector supports d = 1 only");
  std::optional<int> required = required_total;
  if (!required && co.quantization == Quantization::light_front)
    required = co.harmonic_resolution();

  // Mode keys in canonical order, with per-key occupancy bounds.
  struct Key {
    int code;
    int n;
    int wmax;
  };
  std::vector<Key> keys;
  const auto [lo, hi] = co.per_dim[0];
  for (int code = 0; code < model.particles.size(); ++code) {
    const int wmax = model.particles.is_fermionic(code) ? 1 : co.occupancy_cap;
    for (int n = lo; n <= hi; ++n) keys.push_back(Key{code, n, wmax});
  }
  // Achievable momentum-sum window over each key suffix, for pruning.
  std::vector<long long> suf_lo(keys.size() + 1, 0), suf_hi(keys.size() + 1, 0);
  for (std::size_t idx = keys.size(); idx-- > 0;) {
    const long long contrib = static_cast<long long>(keys[idx].wmax) * keys[idx].n;
    suf_lo[idx] = suf_lo[idx + 1] + std::min<long long>(0, contrib);
    suf_hi[idx] = suf_hi[idx + 1] + std::max<long long>(0, contrib);
  }

  const long long cap = sector_cap();
  std::vector<FockState> out;
  std::vector<Mode> cur;
  std::function<void(std::size_t, long long)> rec = [&](std::size_t idx, long long sum) {
    if (required) {
      const long long rem = *required - sum;
      if (rem < suf_lo[idx] || rem > suf_hi[idx]) return;
    }
    if (idx == keys.size()) {
      if (static_cast<long long>(out.size()) >= cap)
        throw CapExceededError("sector exceeds FOCKFORGE_SECTOR_CAP (" +
                               std::to_string(cap) + ") states");
      out.push_back(FockState{cur});
      return;
    }
    const Key& key = keys[idx];
    for (int w = 0; w <= key.wmax; ++w) {
      if (w > 0 && static_cast<int>(cur.size()) + 1 > co.register_count) break;
      if (w > 0) cur.push_back(Mode{key.code, Momentum{key.n}, w});
      rec(idx + 1, sum + static_cast<long long>(w) * key.n);
      if (w > 0) cur.pop_back();
    }
  };
  rec(0, 0);
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::MatrixXd build_dense(const ModelSpec& model, const std::vector<FockState>& basis) {
  const int N = static_cast<int>(basis.size());
  std::map<FockState, int> index_of;
  for (int i = 0; i < N; ++i) index_of[basis[static_cast<std::size_t>(i)]] = i;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
  for (int j = 0; j < N; ++j)
    for (const auto& [state, amp] : bruteforce_row(model, basis[static_cast<std::size_t>(j)])) {
      auto it = index_of.find(state);
      if (it != index_of.end()) H(it->second, j) = amp;
    }
  return H;
}

double one_norm(const Eigen::MatrixXd& H) {
  double best = 0.0;
  for (Eigen::Index j = 0; j < H.cols(); ++j) best = std::max(best, H.col(j).cwiseAbs().sum());
  return best;
}

double max_norm(const Eigen::MatrixXd& H) { return H.cwiseAbs().maxCoeff(); }

double choose_r(const Eigen::MatrixXd& H, long long k) {
  const double hmax = max_norm(H);
  if (hmax == 0.0 || k == 0) return 1.0;
  return std::min(1.0, one_norm(H) / (static_cast<double>(k) * hmax));
}

WalkCheck verify_walk(const ModelSpec& model, std::optional<int> required_total) {
  const std::vector<FockState> basis = enumerate_sector(model, required_total);
  const Eigen::MatrixXd H = build_dense(model, basis);
  const ModelOracle oracle = build_oracle(model);

  WalkCheck chk;
  chk.basis_size = static_cast<long long>(basis.size());
  chk.k = oracle.index_space_size;
  chk.h_one_norm = one_norm(H);
  chk.h_max_norm = max_norm(H);
  chk.r = choose_r(H, chk.k);
  if (H.minCoeff() < -1e-12)
    throw Error("verify_walk requires nonnegative matrix elements");
  if (chk.h_one_norm == 0.0) return chk;

  const int N = static_cast<int>(basis.size());
  const long long k = chk.k;
  std::map<FockState, int> index_of;
  for (int i = 0; i < N; ++i) index_of[basis[static_cast<std::size_t>(i)]] = i;

  // phi_F over (b-register, a-register, flag); component index (b*k + a)*2 + c.
  const auto phi_dim = static_cast<Eigen::Index>(N) * k * 2;
  auto phi_idx = [&](int b, long long a, int c) {
    return (static_cast<Eigen::Index>(b) * k + a) * 2 + c;
  };
  std::vector<Eigen::VectorXd> phi(static_cast<std::size_t>(N),
                                   Eigen::VectorXd::Zero(phi_dim));
  for (int f = 0; f < N; ++f) {
    for (const auto& res : enumerate_all(oracle, basis[static_cast<std::size_t>(f)])) {
      auto it = index_of.find(res.f_prime);
      if (it == index_of.end())
        throw Error("verify_walk: oracle output left the sector basis");
      const int b = it->second;
      if (res.a_flag == 0) {
        const double p = chk.r * H(b, f) / chk.h_one_norm;
        phi[static_cast<std::size_t>(f)](phi_idx(b, 0, 0)) += std::sqrt(std::max(0.0, p));
        phi[static_cast<std::size_t>(f)](phi_idx(b, 0, 1)) +=
            std::sqrt(std::max(0.0, 1.0 / static_cast<double>(k) - p));
      } else {
        phi[static_cast<std::size_t>(f)](phi_idx(b, res.trace.i, 1)) +=
            std::sqrt(1.0 / static_cast<double>(k));
      }
    }
    chk.max_unitarity_dev = std::max(
        chk.max_unitarity_dev,
        std::abs(phi[static_cast<std::size_t>(f)].squaredNorm() - 1.0));
  }

  // Joint space (first state reg) x (b) x (a) x (flag) x (ancilla); the
  // reflection S swaps the state registers and the flag with the ancilla.
  const auto joint_dim = static_cast<Eigen::Index>(N) * N * k * 2 * 2;
  auto joint_idx = [&](int f, int b, long long a, int c, int anc) {
    return ((((static_cast<Eigen::Index>(f) * N + b) * k + a) * 2 + c) * 2 + anc);
  };
  auto lift = [&](int f) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(joint_dim);
    for (int b = 0; b < N; ++b)
      for (long long a = 0; a < k; ++a)
        for (int c = 0; c < 2; ++c) {
          const double amp = phi[static_cast<std::size_t>(f)](phi_idx(b, a, c));
          if (amp != 0.0) u(joint_idx(f, b, a, c, 0)) = amp;
        }
    return u;
  };
  auto apply_S = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(joint_dim);
    for (int f = 0; f < N; ++f)
      for (int b = 0; b < N; ++b)
        for (long long a = 0; a < k; ++a)
          for (int c = 0; c < 2; ++c)
            for (int anc = 0; anc < 2; ++anc) {
              const double amp = u(joint_idx(f, b, a, c, anc));
              if (amp != 0.0) v(joint_idx(b, f, a, anc, c)) = amp;
            }
    return v;
  };

  std::vector<Eigen::VectorXd> lifted, reflected;
  for (int f = 0; f < N; ++f) {
    lifted.push_back(lift(f));
    reflected.push_back(apply_S(lifted.back()));
  }
  for (int f2 = 0; f2 < N; ++f2)
    for (int f = 0; f < N; ++f) {
      const double got = lifted[static_cast<std::size_t>(f2)].dot(
          reflected[static_cast<std::size_t>(f)]);
      const double expect = chk.r * H(f2, f) / chk.h_one_norm;
      chk.max_overlap_dev = std::max(chk.max_overlap_dev, std::abs(got - expect));
    }
  return chk;
}

}  // namespace fockforge
