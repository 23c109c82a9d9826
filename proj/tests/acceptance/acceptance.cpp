// Acceptance checks 1-11. One line per check; exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "prs/certify.hpp"
#include "prs/dae.hpp"
#include "prs/error.hpp"
#include "prs/gp.hpp"
#include "prs/io.hpp"
#include "prs/network.hpp"
#include "prs/powerflow.hpp"

using namespace prs;

namespace {

using Clock = std::chrono::steady_clock;

std::string data(const std::string& rel) { return std::string(PRS_DATA_DIR) + "/" + rel; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const NetworkModel& network() {
  static const NetworkModel net = load_network(data("wscc9.net"));
  return net;
}

OperatingTarget base_target() {
  return {{"Pg2", 2.922}, {"Pg3", 1.523}, {"Vm1", 1.04}, {"Vm2", 1.025}, {"Vm3", 1.025}};
}

CertifyOptions default_options() { return CertifyOptions{}; }

// Subspace searches shared by checks 6 and 8.
struct SearchCase {
  std::string name;
  SubspaceBox box;
  SubspaceSearchResult result;
};

struct Searches {
  std::vector<SearchCase> cases;
  double seconds = 0.0;
  std::string error;
};

const Searches& searches() {
  static const Searches s = [] {
    Searches out;
    const auto t0 = Clock::now();
    try {
      for (const char* name : {"x1", "x2", "x3", "space9"}) {
        SearchCase c;
        c.name = name;
        c.box = load_subspace(data(std::string("subspaces/") + name + ".spec"));
        c.result = subspace_search(make_network_oracle(network(), c.box), c.box, default_options());
        out.cases.push_back(std::move(c));
      }
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return out;
  }();
  return s;
}

// ---- 1

Posterior dense_posterior(const std::vector<Eigen::VectorXd>& x, const std::vector<double>& y, const KernelParams& p,
                          const Eigen::VectorXd& q) {
  const auto m = static_cast<Eigen::Index>(x.size());
  auto sp = [](const Eigen::VectorXd& v) { return std::span<const double>(v.data(), v.size()); };
  Eigen::MatrixXd k(m, m);
  Eigen::VectorXd ks(m), yy = Eigen::Map<const Eigen::VectorXd>(y.data(), m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) k(i, j) = kernel_se(sp(x[i]), sp(x[j]), p);
    k(i, i) += p.noise_sd * p.noise_sd;
    ks[i] = kernel_se(sp(x[i]), sp(q), p);
  }
  const Eigen::MatrixXd inv = k.fullPivLu().inverse();
  return {ks.dot(inv * yy), kernel_se(sp(q), sp(q), p) - ks.dot(inv * ks)};
}

Outcome gp_exactness() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim_d(1, 4), m_d(1, 20);
  std::uniform_real_distribution<double> u(0, 1), len(0.2, 1.0), var(0.5, 2.0), noise(0.05, 0.5), val(-1, 1);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto dim = static_cast<std::size_t>(dim_d(rng));
    const int m = m_d(rng);
    KernelParams p;
    p.signal_variance = var(rng);
    p.noise_sd = noise(rng);
    for (std::size_t d = 0; d < dim; ++d) p.length_scales.push_back(len(rng));
    std::vector<Eigen::VectorXd> x;
    std::vector<double> y;
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd v(dim);
      for (auto& e : v) e = u(rng);
      x.push_back(v);
      y.push_back(val(rng));
    }
    const auto gp = GpModel::fit(dim, x, y, p);
    for (int q = 0; q < 20; ++q) {
      Eigen::VectorXd pt(dim);
      for (auto& e : pt) e = 1.4 * u(rng) - 0.2;
      const auto a = gp.posterior(pt);
      const auto b = dense_posterior(x, y, p, pt);
      worst = std::max({worst, std::abs(a.mean - b.mean), std::abs(a.variance - b.variance)});
    }
  }
  return {worst < 1e-10, fmt("50 cases, max |diff| %.2e (tol 1e-10)", worst)};
}

// ---- 2

Outcome eigen_exactness() {
  double worst = 0.0;
  const Eigen::MatrixXd diag = Eigen::Vector4d(-3.5, 0.25, -1e-3, -7.0).asDiagonal();
  worst = std::max(worst, std::abs(critical_eigenvalue(diag) - 0.25));

  // x'' + 0.4 x' + 4.04 x: roots -0.2 +- 2i
  const Eigen::Matrix2d companion{{0, 1}, {-4.04, -0.4}};
  worst = std::max(worst, std::abs(critical_eigenvalue(companion) + 0.2));

  Eigen::MatrixXd core = Eigen::MatrixXd::Zero(5, 5);
  core(0, 0) = -1.0;
  core.block(1, 1, 2, 2) << -0.05, 1.7, -1.7, -0.05;
  core(3, 3) = -2.5;
  core(4, 4) = -0.3;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd s(5, 5);
  for (auto& e : s.reshaped()) e = u(rng);
  s += 3.0 * Eigen::MatrixXd::Identity(5, 5);
  const Eigen::MatrixXd similar = s * core * s.inverse();
  worst = std::max(worst, std::abs(critical_eigenvalue(similar) + 0.05));
  return {worst < 1e-8, fmt("diagonal, companion, 5x5 similarity: max err %.2e (tol 1e-8)", worst)};
}

// ---- 3

DaeJacobians central_differences(const NetworkModel& net, const EquilibriumPoint& eq) {
  const Eigen::Index nx = eq.x.size(), ny = eq.y.size();
  DaeJacobians j{Eigen::MatrixXd(nx, nx), Eigen::MatrixXd(nx, ny), Eigen::MatrixXd(ny, nx), Eigen::MatrixXd(ny, ny)};
  for (Eigen::Index col = 0; col < nx + ny; ++col) {
    Eigen::VectorXd xp = eq.x, xm = eq.x, yp = eq.y, ym = eq.y;
    double& vp = col < nx ? xp[col] : yp[col - nx];
    double& vm = col < nx ? xm[col] : ym[col - nx];
    const double h = 1e-6 * std::max(1.0, std::abs(vp));
    vp += h;
    vm -= h;
    const auto rp = dae_residual(net, eq, xp, yp), rm = dae_residual(net, eq, xm, ym);
    const Eigen::VectorXd df = (rp.f - rm.f) / (2 * h), dg = (rp.g - rm.g) / (2 * h);
    if (col < nx) {
      j.a.col(col) = df;
      j.c.col(col) = dg;
    } else {
      j.b.col(col - nx) = df;
      j.d.col(col - nx) = dg;
    }
  }
  return j;
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff());
}

double pencil_mismatch(const DaeJacobians& j) {
  const Eigen::MatrixXd jr = reduce_jacobian(j);
  const Eigen::Index nx = j.a.rows(), ny = j.d.rows();
  Eigen::MatrixXd m(nx + ny, nx + ny), e = Eigen::MatrixXd::Zero(nx + ny, nx + ny);
  m << j.a, j.b, j.c, j.d;
  e.topLeftCorner(nx, nx).setIdentity();
  Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(m, e);
  if (ges.info() != Eigen::Success) return INFINITY;
  std::vector<std::complex<double>> finite;
  for (Eigen::Index i = 0; i < nx + ny; ++i) {
    const std::complex<double> alpha = ges.alphas()[i];
    const double beta = ges.betas()[i];
    if (std::abs(beta) > 1e-9 * std::max(1.0, std::abs(alpha))) finite.push_back(alpha / beta);
  }
  if (finite.size() != static_cast<std::size_t>(nx)) return INFINITY;
  Eigen::EigenSolver<Eigen::MatrixXd> es(jr, false);
  std::vector<bool> used(finite.size(), false);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < nx; ++i) {
    const std::complex<double> l = es.eigenvalues()[i];
    std::size_t best = 0;
    double dist = INFINITY;
    for (std::size_t k = 0; k < finite.size(); ++k)
      if (!used[k] && std::abs(finite[k] - l) < dist) dist = std::abs(finite[k] - l), best = k;
    used[best] = true;
    worst = std::max(worst, dist / std::max(1.0, std::abs(l)));
  }
  return worst;
}

Outcome linearization() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dp(-0.15, 0.15), dv(-0.02, 0.02);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    OperatingTarget z{{"Pg2", 2.922 + dp(rng)}, {"Pg3", 1.523 + dp(rng)}, {"Vm1", 1.04 + dv(rng)},
                      {"Vm2", 1.025 + dv(rng)}, {"Vm3", 1.025 + dv(rng)}};
    const auto eq = solve_power_flow(network(), z);
    const auto ad = linearize(network(), eq);
    const auto fd = central_differences(network(), eq);
    worst = std::max({worst, rel_err(ad.a, fd.a), rel_err(ad.b, fd.b), rel_err(ad.c, fd.c), rel_err(ad.d, fd.d)});
  }
  const auto eq = map_sample_to_equilibrium(network(), base_target());
  const double pencil = pencil_mismatch(linearize(network(), eq));
  return {worst < 1e-5 && pencil < 1e-6,
          fmt("FD max rel err %.2e (tol 1e-5) at 10 points; pencil spectrum err %.2e (tol 1e-6)", worst, pencil)};
}

// ---- 4

Outcome base_point(double& seconds) {
  const auto t0 = Clock::now();
  const NetworkModel standard = load_network(data("wscc9_standard.net"));
  OperatingTarget base = base_target();
  base.set("Pg1", 1.515);
  base.set("Qg1", 1.421);
  base.set("Qg2", 1.119);
  base.set("Qg3", 0.590);
  const NetworkModel cal = calibrate_base_loads(standard, base);
  const auto tr = trace_lambda_c(cal, base_target());
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  const auto& eq = tr.equilibrium;
  const double err = std::max({std::abs(eq.pg[0] - 1.515), std::abs(eq.qg[0] - 1.421), std::abs(eq.qg[1] - 1.119),
                               std::abs(eq.qg[2] - 0.590)});
  return {err <= 1e-3 && tr.lambda_c < 0.0 && seconds < 1.0,
          fmt("Pg1 %.4f Qg (%.4f, %.4f, %.4f), max err %.1e (tol 1e-3), lambda_c %.6f", eq.pg[0], eq.qg[0], eq.qg[1],
              eq.qg[2], err, tr.lambda_c)};
}

// ---- 5

Outcome coverage_1d() {
  const auto box = load_subspace(data("subspaces/vm3.spec"));
  const auto oracle = make_network_oracle(network(), box);
  const auto r = certify_prs(oracle, box, default_options());
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(box.at(Eigen::VectorXd::Constant(1, i / 199.0)));
  const auto two_sigma = coverage(oracle, r.run.gp, box, 4.0, pts);
  return {two_sigma.coverage() >= 0.95,
          fmt("%zu samples, stop=%s, coverage of mu+2sigma %.3f over 200 points (need 0.95)", r.cert.samples,
              stop_reason_name(r.cert.reason), two_sigma.coverage())};
}

// ---- 6

Outcome soundness(double& seconds) {
  const auto& s = searches();
  if (!s.error.empty()) return {false, "search failed: " + s.error};
  const auto t0 = Clock::now();
  std::size_t checked = 0, unstable = 0;
  std::string detail;
  std::vector<std::pair<std::string, CertifyResult>> certified;
  const auto base = load_subspace(data("subspaces/base.spec"));
  certified.emplace_back("base", certify_prs(make_network_oracle(network(), base), base, default_options()));
  for (const auto& c : s.cases) certified.emplace_back(c.name, c.result.result);
  for (const auto& [name, r] : certified) {
    if (r.cert.verdict != Verdict::prs) continue;
    const auto rep = validate_certificate(make_network_oracle(network(), r.cert.box), r, 1000, 1);
    ++checked;
    unstable += rep.unstable;
    detail += fmt(" %s:%zu/%zu", name.c_str(), rep.unstable, rep.points);
  }
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {checked == certified.size() && unstable == 0 && seconds < 300.0,
          fmt("%zu PRS boxes, unstable/points:", checked) + detail};
}

// ---- 7

Outcome non_certification() {
  std::string detail;
  bool ok = true;
  for (const char* name : {"x1", "x2", "x3"}) {
    const auto box = load_subspace(data(std::string("subspaces/") + name + ".spec"));
    const auto r = certify_prs(make_network_oracle(network(), box), box, default_options());
    ok = ok && r.cert.verdict == Verdict::not_certified;
    detail += fmt("; %s %s p_m=%.4f", name, verdict_name(r.cert.verdict), r.cert.p_m);
  }
  return {ok, detail.substr(2)};
}

// ---- 8

Outcome subspace() {
  const auto& s = searches();
  if (!s.error.empty()) return {false, "search failed: " + s.error};
  bool ok = s.seconds < 600.0;
  std::string detail;
  for (const auto& c : s.cases) {
    const auto& r = c.result;
    const bool strict = c.box.contains(r.box) && (r.box.lower != c.box.lower || r.box.upper != c.box.upper);
    const bool has_base = r.box.contains(*c.box.base);
    const bool prs = r.result.cert.verdict == Verdict::prs;
    const bool nonempty = c.name != "space9" || r.alpha > 0.0;
    ok = ok && strict && has_base && prs && nonempty;
    detail += fmt("; %s alpha=%.4f %s", c.name.c_str(), r.alpha, verdict_name(r.result.cert.verdict));
  }
  return {ok, detail.substr(2)};
}

// ---- 9

Outcome confidence() {
  KernelParams p;
  p.signal_variance = 0.125 * 0.125;
  p.length_scales = {1.0 / std::sqrt(-2.0 * std::log(0.6))};
  p.noise_sd = 0.0;
  const auto gp = GpModel::fit(1, {Eigen::VectorXd::Constant(1, 1.0)}, {-1.0 / 6.0}, p);
  const auto box = make_box({"x"}, {0}, {1});
  const auto at0 = gp.posterior(Eigen::VectorXd::Constant(1, 0.0));
  BetaSchedule s;
  s.delta = 0.05;
  const auto r = confidence_search(gp, box, s, UcbConfig{});
  s.delta = r.delta_prime - 1e-3;
  const auto below = certificate_from_model(gp, box, s, UcbConfig{});
  return {std::abs(r.delta_prime - 0.3173) <= 2e-3 && r.cert.verdict == Verdict::prs &&
              below.verdict != Verdict::prs,
          fmt("mu=%.4f sigma=%.4f at maximizer; delta'=%.5f (want 0.3173 +- 2e-3); delta'-1e-3 gives %s", at0.mean,
              std::sqrt(at0.variance), r.delta_prime, verdict_name(below.verdict))};
}

// ---- 10

Outcome performance(double& seconds) {
  const auto box = load_subspace(data("subspaces/x3.spec"));
  auto opts = default_options();
  opts.ucb.max_samples = 60;
  opts.ucb.tol_p = 1e-12;
  const auto t0 = Clock::now();
  const auto r = certify_prs(make_network_oracle(network(), box), box, opts);
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {r.cert.samples <= 60 && seconds < 60.0,
          fmt("2-D box, %zu samples, %s, %.3f s", r.cert.samples, verdict_name(r.cert.verdict), seconds)};
}

// ---- 11

Outcome determinism() {
  auto run_once = [] {
    std::string out;
    const auto box = load_subspace(data("subspaces/x2.spec"));
    const auto oracle = make_network_oracle(network(), box);
    const auto r = certify_prs(oracle, box, default_options());
    out += format_certificate(r.cert) + format_history(r.run.history);
    const auto vbox = load_subspace(data("subspaces/vm_space.spec"));
    const auto s = subspace_search(make_network_oracle(network(), vbox), vbox, default_options());
    ReportExtras ex;
    ex.alpha = s.alpha;
    ex.anchor_lambda = s.anchor_lambda;
    out += format_certificate(s.result.cert, ex) + format_history(s.result.run.history) + format_box_table(s.box);
    return out;
  };
  const std::string a = run_once(), b = run_once();
  return {a == b && !a.empty(), fmt("two runs, %zu bytes of certificates and histories, %s", a.size(),
                                    a == b ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const std::function<Outcome(double&)>& fn) {
    const auto t0 = Clock::now();
    double own = -1.0;
    Outcome o;
    try {
      o = fn(own);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = own >= 0.0 ? own : std::chrono::duration<double>(Clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("criterion %2d %s  %8.3f s  %s\n", n, o.pass ? "PASS" : "FAIL", t, o.detail.c_str());
    std::fflush(stdout);
  };
  auto plain = [](Outcome (*f)()) { return [f](double&) { return f(); }; };

  report(1, [](double& s) {
    const auto t0 = Clock::now();
    auto o = gp_exactness();
    s = std::chrono::duration<double>(Clock::now() - t0).count();
    o.pass = o.pass && s < 5.0;
    return o;
  });
  report(2, plain(eigen_exactness));
  report(3, plain(linearization));
  report(4, base_point);
  report(5, [](double& s) {
    const auto t0 = Clock::now();
    auto o = coverage_1d();
    s = std::chrono::duration<double>(Clock::now() - t0).count();
    o.pass = o.pass && s < 60.0;
    return o;
  });
  report(6, soundness);
  report(7, plain(non_certification));
  report(8, [](double& s) {
    auto o = subspace();
    s = searches().seconds;
    return o;
  });
  report(9, plain(confidence));
  report(10, performance);
  report(11, plain(determinism));
  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
