#include "fockforge/resource_estimator.hpp"

#include <cmath>
#include <sstream>

#include "fockforge/oracle_enumerator.hpp"

namespace fockforge {

namespace {

long long binom(long long n, long long k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long r = 1;
  for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

long long ipow(long long base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

long long sparsity_bound(int I, int f, int g, int d, const Cutoffs& cutoffs) {
  if (f < g) throw Error("sparsity_bound: f < g");
  const int h = f - g;
  long long bound = binom(I + h - 1, h);
  const int exp = std::max(g - 1, 0);
  for (int j = 0; j < d; ++j) {
    const auto [lo, hi] = cutoffs.per_dim[static_cast<std::size_t>(j)];
    bound *= ipow(std::max<long long>(hi - lo, 1), exp);
  }
  return bound;
}

long long sparsity_bound(const ModelSpec& model) {
  long long total = 0;
  for (const auto& ix : model.interactions)
    total += sparsity_bound(model.cutoffs.register_count, ix.f(), ix.g(),
                            model.cutoffs.dims(), model.cutoffs);
  return total;
}

double query_count_static(long long k, double H_max, double t, double eps) {
  if (eps >= 1.0 || eps <= 0.0) throw DomainError("query_count_static: need 0 < eps < 1");
  const double loglog = std::log(std::log(1.0 / eps));
  if (loglog <= 0.0)
    throw DomainError("query_count_static: ln(ln(1/eps)) <= 0, estimate undefined");
  const double tau = static_cast<double>(k) * H_max * t;
  return tau + std::log(1.0 / eps) / loglog;
}

double query_count_timedep(double tau, double eps) {
  if (tau <= 0.0) throw DomainError("query_count_timedep: need tau > 0");
  if (eps >= 1.0 || eps <= 0.0) throw DomainError("query_count_timedep: need 0 < eps < 1");
  const double inner = std::log(tau / eps);
  if (inner <= 0.0 || std::log(inner) <= 0.0)
    throw DomainError("query_count_timedep: ln(ln(tau/eps)) <= 0, estimate undefined");
  return tau * inner / std::log(inner);
}

double total_log_local(double tau, double eps, int I, int h, int g, int d,
                       long long Lambda) {
  if (eps >= 1.0 || eps <= 0.0) throw DomainError("total_log_local: need 0 < eps < 1");
  const double loglog = std::log(std::log(1.0 / eps));
  if (loglog <= 0.0)
    throw DomainError("total_log_local: ln(ln(1/eps)) <= 0, estimate undefined");
  const double queries = tau + std::log(1.0 / eps) / loglog;
  const double factor = std::pow(static_cast<double>(I), h) +
                        std::pow(static_cast<double>(Lambda), d * g);
  return queries * factor;
}

ResourceReport estimate_resources(const ModelSpec& model, double t, double eps,
                                  double H_max, bool time_dependent) {
  const Cutoffs& co = model.cutoffs;
  co.check();
  ResourceReport rep;
  rep.model_name = model.name;
  rep.I = co.register_count;
  rep.W = co.occupancy_cap;
  rep.d = co.dims();
  rep.t = t;
  rep.eps = eps;
  rep.H_max = H_max;
  rep.time_dependent = time_dependent;
  for (int j = 0; j < co.dims(); ++j) {
    const auto [lo, hi] = co.per_dim[static_cast<std::size_t>(j)];
    rep.Lambda_range = std::max(rep.Lambda_range, static_cast<long long>(hi - lo));
  }
  for (const auto& ix : model.interactions) {
    rep.f_max = std::max(rep.f_max, ix.f());
    rep.g_max = std::max(rep.g_max, ix.g());
    rep.h_max = std::max(rep.h_max, ix.n_incoming());
    rep.legs_per_interaction[ix.name] = {ix.f(), ix.g(), ix.n_incoming()};
  }

  const int n_q = model.particles.label_bits();
  rep.qubits_compact = qubits_total(co, n_q);
  rep.qubits_direct = qubits_direct(co, model.particles.size());
  rep.sparsity_bound_total = sparsity_bound(model);

  long long k = 0;
  for (const auto& ix : model.interactions)
    k += index_space_size(ix, co, model.particles);
  rep.k_exact = k;
  rep.tau = static_cast<double>(k) * H_max * t;
  rep.queries = time_dependent ? query_count_timedep(rep.tau, eps)
                               : query_count_static(k, H_max, t, eps);
  const double factor = std::pow(static_cast<double>(rep.I), rep.h_max) +
                        std::pow(static_cast<double>(rep.Lambda_range),
                                 rep.d * rep.g_max);
  rep.total_log_local_ops = rep.queries * factor;
  return rep;
}

std::string to_string(const ResourceReport& rep) {
  std::ostringstream os;
  os << "resource estimate (unit constants, natural logs)\n";
  os << "  model:               " << rep.model_name << "\n";
  os << "  qubits (compact):    " << rep.qubits_compact << "\n";
  os << "  qubits (direct):     " << rep.qubits_direct << "\n";
  os << "  sparsity bound:      " << rep.sparsity_bound_total << "\n";
  if (rep.k_exact) os << "  index-space size k:  " << *rep.k_exact << "\n";
  os << "  I / W / d:           " << rep.I << " / " << rep.W << " / " << rep.d << "\n";
  os << "  f / g / h (max):     " << rep.f_max << " / " << rep.g_max << " / "
     << rep.h_max << "\n";
  os << "  momentum range:      " << rep.Lambda_range << "\n";
  os << "  t / eps / H_max:     " << rep.t << " / " << rep.eps << " / " << rep.H_max
     << "\n";
  os << "  tau:                 " << rep.tau << "\n";
  os << "  queries (" << (rep.time_dependent ? "time-dep" : "static  ")
     << "): " << rep.queries << "\n";
  os << "  total log-local ops: " << rep.total_log_local_ops << "\n";
  return os.str();
}

}  // namespace fockforge
