// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per criterion. With no arguments
// every criterion runs; otherwise only the named ones.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cohelm/cohelm.hpp"

using namespace cohelm;
using std::numbers::pi;

namespace
{

struct Outcome
{
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string &what)
  {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void info(const std::string &what) { notes.push_back("     " + what); }
};

std::string fmt(double v, int prec = 4)
{
  std::ostringstream o;
  o << std::setprecision(prec) << v;
  return o.str();
}

double max_abs(const SparseComplexMatrix &A)
{
  double m = 0.0;
  for (int c = 0; c < A.outerSize(); c++)
    for (SparseComplexMatrix::InnerIterator it(A, c); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double max_abs(const SparseRealMatrix &A)
{
  double m = 0.0;
  for (int c = 0; c < A.outerSize(); c++)
    for (SparseRealMatrix::InnerIterator it(A, c); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

ComplexVector random_vector(int n, std::mt19937_64 &rng)
{
  std::normal_distribution<double> N;
  ComplexVector v(n);
  for (int i = 0; i < n; i++) v[i] = Complex(N(rng), N(rng));
  return v;
}

double max_over_min(const std::vector<double> &v)
{
  return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
}

// ---------------------------------------------------------------------------

Outcome table1()
{
  Outcome o;
  // Reference grid: rows = projection norm, columns = measurement norm.
  const double ref[4][4] = {{0.000556, 0.00308, 0.0173, 1.46},
                            {0.000574, 0.00301, 0.0143, 1.35},
                            {0.000824, 0.00333, 0.0125, 1.23},
                            {0.615, 0.615, 0.589, 0.764}};
  ExperimentConfig cfg;
  cfg.k = 30.0 * pi;
  cfg.n = 100;
  const auto rows = run_projection_table(cfg);
  double worst = 0.0;
  for (int r = 0; r < 4; r++)
  {
    std::string line = to_string(rows[r].projection) + " row:";
    for (int c = 0; c < 4; c++)
    {
      const double got = rows[r].relative.get(kAllNorms[c]);
      const double dev = std::abs(got - ref[r][c]) / ref[r][c];
      line += " " + fmt(got, 5);
      if (rows[r].ill_conditioned)
      {
        continue;
      }
      worst = std::max(worst, dev);
      o.check(dev <= 0.02, to_string(rows[r].projection) + "/" + to_string(kAllNorms[c]) + " " + fmt(got, 5) +
                               " vs " + fmt(ref[r][c]) + " (" + fmt(100 * dev, 3) + "%)");
    }
    o.info(line + " (Gram condition " + fmt(rows[r].gram_condition, 3) + ")");
  }
  o.info("largest deviation " + fmt(100 * worst, 3) + "%");
  return o;
}

Outcome coercivity()
{
  Outcome o;
  auto run = [&](const C1Space &s, double k, int j) {
    const WaveContext ctx = WaveContext::make(s.domain(), k, j == 1 ? Formulation::MsOneThird : Formulation::MsKSquared);
    const AssembledSystem sys = assemble_ms(s, ctx, ProblemData::zero());
    const SpdFactor D(assemble_weight(s, ctx, j));
    const double lmin = pencil_min(hermitian_part(sys.matrix), D);
    const double bound = s.domain().gamma() / 4.0;
    o.check(lmin >= bound - 1e-8, "d=" + std::to_string(s.dim()) + " j=" + std::to_string(j) + " k=" + fmt(k) +
                                      " N=" + std::to_string(s.num_dofs()) + ": lambda_min " + fmt(lmin, 6) +
                                      " >= gamma/4 = " + fmt(bound, 6));
  };
  for (double k : {10.0, 100.0, 1000.0})
  {
    const C1Space s = build_space_1d(Domain::unit_interval(), static_cast<int>(std::ceil(std::pow(k, 1.5) - 1e-9)));
    for (int j : {1, 2}) run(s, k, j);
  }
  for (double k : {10.0, 50.0})
  {
    const C1Space s = space_for_meshwidth(Domain::unit_square(), 1.0 / k);
    for (int j : {1, 2}) run(s, k, j);
  }
  return o;
}

Outcome decomposition()
{
  Outcome o;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> N;
  const C1Space s1 = build_space_1d(Domain::unit_interval(), 40);
  const C1Space s2 = build_space_2d(Domain::unit_square(), 6, 5);
  for (const C1Space *s : {&s1, &s2})
  {
    for (Formulation f : {Formulation::MsOneThird, Formulation::MsKSquared})
    {
      const double k = s->dim() == 1 ? 25.0 : 8.0;
      const WaveContext ctx = WaveContext::make(s->domain(), k, f);
      const std::string tag = "d=" + std::to_string(s->dim()) + " " + to_string(f);
      const CoreMatrices C = assemble_core(*s, ctx);
      const SparseComplexMatrix a0 = assemble_a0(*s, ctx);
      o.check(max_abs(a0) <= 1e-9 * max_abs(C.S), tag + ": max|a0| " + fmt(max_abs(a0), 3) + " <= 1e-9 max|S| (" +
                                                       fmt(max_abs(C.S), 3) + ")");

      const SparseComplexMatrix Ast = assemble_standard(*s, ctx, ProblemData::zero()).matrix;
      const SparseComplexMatrix ax = assemble_ax(*s, ctx);
      const double A = ctx.a_value(), k2 = k * k;
      double worst = 0.0;
      for (int t = 0; t < 3; t++)
      {
        const Complex Z1(N(rng), N(rng)), Z2(N(rng), N(rng));
        const SparseComplexMatrix bz = assemble_bz(*s, ctx, Z1, Z2, ProblemData::zero()).matrix;
        SparseComplexMatrix diff = bz - (Z1 * Ast + Complex(A / k2) * to_complex(C.L2) + Z2 * a0 + ax);
        worst = std::max(worst, max_abs(diff) / max_abs(bz));
      }
      o.check(worst <= 1e-9, tag + ": decomposition residual " + fmt(worst, 3));

      const auto [Z1, Z2] = ms_parameters(s->dim(), ctx);
      const SparseComplexMatrix bz = assemble_bz(*s, ctx, Z1, Z2, ProblemData::zero()).matrix;
      const SparseComplexMatrix b = assemble_ms(*s, ctx, ProblemData::zero()).matrix;
      const double rel = max_abs(SparseComplexMatrix(bz - b)) / max_abs(b);
      o.check(rel <= 1e-9, tag + ": b_Z at Z1 = conj(Z2) = (d-1)/2 + i k beta equals b, rel " + fmt(rel, 3));
    }
  }
  return o;
}

Outcome norms()
{
  Outcome o;
  std::mt19937_64 rng(99);
  for (int dim : {1, 2})
  {
    const double k = dim == 1 ? 50.0 : 10.0;
    const C1Space s =
        dim == 1 ? build_space_1d(Domain::unit_interval(), 80) : build_space_2d(Domain::unit_square(), 7, 7);
    const WaveContext ctx = WaveContext::make(s.domain(), k);
    const SparseRealMatrix D1 = assemble_weight(s, ctx, 1), D2 = assemble_weight(s, ctx, 2);
    const double k2 = k * k;
    double worst = 0.0;
    bool sandwich = true;
    for (int t = 0; t < 50; t++)
    {
      const ComplexVector v = random_vector(s.num_dofs(), rng);
      const NormSet n = discrete_norms(s, v, ctx);
      const double q1 = v.dot(D1 * v).real(), q2 = v.dot(D2 * v).real();
      worst = std::max({worst, std::abs(q1 - n.v1 * n.v1) / q1, std::abs(q2 - n.v2 * n.v2) / q2});
      sandwich = sandwich && q1 / std::max(3.0, 2.0 / k2) <= q2 * (1.0 + 1e-12) &&
                 q2 <= (2.0 * k2 + 1.0) * q1 * (1.0 + 1e-12);
    }
    o.check(worst <= 1e-10, "d=" + std::to_string(dim) + ": v*D v vs quadrature norm, worst rel " + fmt(worst, 3));
    o.check(sandwich, "d=" + std::to_string(dim) + ": norm-equivalence sandwich on 50 samples");
  }
  return o;
}

Outcome accuracy()
{
  Outcome o;
  ExperimentConfig c8;
  c8.a = 6.0 / 5.0;
  c8.tau = {8.0};
  const auto rows8 = run_accuracy_sweep(c8);
  std::map<Formulation, std::vector<double>> e8;
  for (const auto &r : rows8)
  {
    if (!r.error.empty()) o.check(false, "row error: " + r.error);
    e8[r.formulation].push_back(r.relative.h1k);
  }
  for (Formulation f : {Formulation::Standard, Formulation::MsOneThird})
  {
    const double ratio = max_over_min(e8[f]);
    o.check(ratio <= 5.0, "tau*=8 " + to_string(f) + ": max/min H1k error " + fmt(ratio) + " <= 5");
  }
  for (Formulation f : {Formulation::LeastSquares, Formulation::MsKSquared})
  {
    const double first = e8[f].front(), last = e8[f].back();
    o.check(last >= 5.0 * first, "tau*=8 " + to_string(f) + ": final/initial H1k error " + fmt(last / first) +
                                     " >= 5 (initial " + fmt(first) + ", final " + fmt(last) + ")");
  }

  ExperimentConfig c40;
  c40.a = 3.0 / 2.0;
  c40.tau = {40.0};
  c40.formulations = {Formulation::LeastSquares, Formulation::MsKSquared};
  const auto rows40 = run_accuracy_sweep(c40);
  std::map<Formulation, double> worst;
  for (const auto &r : rows40)
  {
    if (!r.error.empty()) o.check(false, "row error: " + r.error);
    worst[r.formulation] = std::max(worst[r.formulation], r.relative.h1k);
  }
  for (const auto &[f, w] : worst)
  {
    o.check(w <= 0.5, "tau*=40, a=3/2 " + to_string(f) + ": max H1k error " + fmt(w) + " <= 0.5");
  }
  return o;
}

Outcome qo_ridge()
{
  Outcome o;
  ExperimentConfig cfg;
  cfg.k_min = 10.0;
  cfg.k_max = 3000.0;
  cfg.k_samples = 12;
  cfg.hk_min = 0.2;
  cfg.hk_max = 50.0;
  cfg.h_samples = 30;
  const auto rows = run_qo_surface(cfg);
  for (const auto &r : rows)
  {
    if (r.on_ridge) o.info("k=" + fmt(r.k, 5) + " ridge " + fmt(r.qo.ratio) + " at hk=" + fmt(r.hk, 3));
  }
  const auto fit = ridge_fit(rows);
  o.check(fit.has_value(), "ridge fit available");
  if (fit)
  {
    o.check(fit->exponent >= 0.3 && fit->exponent <= 0.5, "ridge exponent " + fmt(fit->exponent) + " in [0.3, 0.5]");
  }
  return o;
}

std::vector<double> iteration_series(const std::vector<GmresRow> &rows, int j, bool weighted, std::vector<double> *ks)
{
  std::vector<double> its;
  for (const auto &r : rows)
  {
    if (r.j == j && r.weighted == weighted)
    {
      its.push_back(r.iterations);
      if (ks) ks->push_back(r.k);
    }
  }
  return its;
}

Outcome gmres_1d()
{
  Outcome o;
  auto audit = [&](const std::vector<GmresRow> &rows) {
    for (const auto &r : rows)
    {
      const std::string tag = "j=" + std::to_string(r.j) + " k=" + fmt(r.k) + (r.weighted ? " w" : " u");
      if (!r.error.empty()) o.check(false, tag + " error: " + r.error);
      if (!r.converged) o.check(false, tag + " did not converge");
      if (r.weighted)
      {
        if (!r.monotone) o.check(false, tag + " residual history increased");
        if (!r.elman_bound || r.iterations > *r.elman_bound)
        {
          o.check(false, tag + " iterations " + std::to_string(r.iterations) + " exceed the Elman-type bound");
        }
      }
    }
  };

  // k-independence for j = 2 on two meshes.
  for (double tau : {4.0, 40.0})
  {
    ExperimentConfig cfg;
    cfg.j = {2};
    cfg.tau = {tau};
    cfg.k_list = {40.0, 80.0, 160.0, 320.0};
    const auto rows = run_gmres_sweep(cfg);
    audit(rows);
    const auto w = iteration_series(rows, 2, true, nullptr);
    const auto u = iteration_series(rows, 2, false, nullptr);
    std::string counts;
    for (std::size_t i = 0; i < w.size(); i++) counts += " " + fmt(w[i]) + "/" + fmt(u[i]);
    o.info("j=2 tau*=" + fmt(tau) + " iterations weighted/unweighted:" + counts);
    const double var = max_over_min(w) - 1.0;
    o.check(var <= 0.2, "j=2 tau*=" + fmt(tau) + ": weighted iteration variation " + fmt(100 * var, 3) + "% <= 20%");
  }

  // Growth for j = 1 with tau* = 4.
  ExperimentConfig cfg;
  cfg.j = {1};
  cfg.tau = {4.0};
  const auto rows = run_gmres_sweep(cfg);
  audit(rows);
  std::vector<double> ks;
  const auto w = iteration_series(rows, 1, true, &ks);
  const auto u = iteration_series(rows, 1, false, nullptr);
  std::string counts;
  for (std::size_t i = 0; i < w.size(); i++) counts += " " + fmt(w[i]) + "/" + fmt(u[i]);
  o.info("j=1 tau*=4 iterations weighted/unweighted:" + counts);
  const double ew = fit_growth_rate(ks, w).exponent, eu = fit_growth_rate(ks, u).exponent;
  o.info("unweighted exponent " + fmt(eu));
  o.check(std::abs(ew - 0.57) <= 0.15, "j=1 tau*=4 weighted exponent " + fmt(ew) + " in 0.57 +- 0.15");
  o.check(true, "Elman-type bound, monotone residuals and convergence audited on every run");
  return o;
}

Outcome gmres_2d()
{
  Outcome o;
  ExperimentConfig c2;
  c2.dim = 2;
  c2.direction = {1.0, 1.0};
  c2.j = {1, 2};
  c2.tau = {4.0};
  c2.k_min = 10.0;
  c2.k_max = 110.0;
  c2.k_samples = 5;
  c2.modes = GmresModes::Weighted;
  c2.fov = false;
  const auto rows = run_gmres_sweep(c2);
  for (const auto &r : rows)
  {
    if (!r.error.empty() || !r.converged) o.check(false, "2-d j=" + std::to_string(r.j) + " k=" + fmt(r.k) + " failed");
    o.info("2-d j=" + std::to_string(r.j) + " k=" + fmt(r.k) + " N=" + std::to_string(r.ndofs) +
           " iterations=" + std::to_string(r.iterations));
  }
  std::vector<double> k1, k2;
  const auto i1 = iteration_series(rows, 1, true, &k1);
  const auto i2 = iteration_series(rows, 2, true, &k2);
  const double e1 = fit_growth_rate(k1, i1).exponent, e2 = fit_growth_rate(k2, i2).exponent;

  ExperimentConfig c1;
  c1.j = {2};
  c1.tau = {4.0};
  c1.modes = GmresModes::Weighted;
  c1.fov = false;
  std::vector<double> kk;
  const auto i1d = iteration_series(run_gmres_sweep(c1), 2, true, &kk);
  const double e1d = fit_growth_rate(kk, i1d).exponent;

  o.check(e1 >= 1.0, "2-d j=1 exponent " + fmt(e1) + " >= 1.0");
  o.check(e2 >= e1d, "2-d j=2 exponent " + fmt(e2) + " >= 1-d j=2 exponent " + fmt(e1d));
  o.check(e2 <= e1 + 0.5, "2-d j=2 exponent " + fmt(e2) + " <= 2-d j=1 exponent + 0.5 = " + fmt(e1 + 0.5));
  return o;
}

Outcome indefiniteness()
{
  Outcome o;
  const C1Space s = build_space_1d(Domain::unit_interval(), 32);
  const WaveContext ctx = WaveContext::make(s.domain(), 2.0 * pi, Formulation::Standard);
  const IndefinitenessWitness w = standard_form_indefiniteness(s, ctx);
  const SparseComplexMatrix A = assemble_standard(s, ctx, ProblemData::zero()).matrix;
  const double re = w.v.dot(A * w.v).real();
  o.check(re < 0.0, "k=2 pi: Re a_ST(v, v) = " + fmt(re) + " < 0 (pencil minimum " + fmt(w.lambda_min) + ")");
  return o;
}

// Textbook GMRES: Householder-orthonormalized Krylov basis and a dense least
// squares solve at every step.
std::vector<double> dense_gmres_residuals(const Eigen::MatrixXcd &A, const ComplexVector &b, int steps)
{
  std::vector<double> out{b.norm()};
  Eigen::MatrixXcd K(b.size(), 0);
  ComplexVector v = b / b.norm();
  for (int m = 1; m <= steps; m++)
  {
    K.conservativeResize(Eigen::NoChange, m);
    K.col(m - 1) = v;
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(K);
    const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(b.size(), m);
    const Eigen::MatrixXcd AQ = A * Q;
    const ComplexVector y = AQ.colPivHouseholderQr().solve(b);
    out.push_back((b - AQ * y).norm());
    v = A * Q.col(m - 1);
    v -= Q * (Q.adjoint() * v);
    v -= Q * (Q.adjoint() * v);
    v /= v.norm();
  }
  return out;
}

Outcome solver_oracles()
{
  Outcome o;
  std::mt19937_64 rng(31);
  std::normal_distribution<double> N;
  double worst = 0.0;
  for (int trial = 0; trial < 5; trial++)
  {
    const int n = 30;
    Eigen::MatrixXcd A(n, n);
    for (int i = 0; i < n; i++)
      for (int j = 0; j < n; j++) A(i, j) = Complex(N(rng), N(rng)) / std::sqrt(double(n));
    A += 2.0 * Eigen::MatrixXcd::Identity(n, n);
    const ComplexVector b = random_vector(n, rng);
    const LinearOperator C = [&](const ComplexVector &x) { return ComplexVector(A * x); };
    const SparseRealMatrix I = SpdFactor::identity(n).matrix();
    const LinearOperator W = [&](const ComplexVector &x) { return ComplexVector(I * x); };
    const GmresResult r = weighted_gmres(C, b, W, {1e-13, n});
    const auto ref = dense_gmres_residuals(A, b, static_cast<int>(r.residual_history.size()) - 1);
    for (std::size_t m = 0; m < ref.size(); m++)
    {
      worst = std::max(worst, std::abs(r.residual_history[m] - ref[m]) / ref[0]);
    }
  }
  o.check(worst <= 1e-10, "weighted GMRES (D = I) vs dense oracle residual histories, worst " + fmt(worst, 3));

  const double tol = 1e-6;
  for (int dim : {1, 2})
  {
    for (int j : {1, 2})
    {
      const double k = dim == 1 ? 40.0 : 12.0;
      const C1Space s = dim == 1 ? build_space_1d(Domain::unit_interval(), 60) : build_space_2d(Domain::unit_square(), 8, 8);
      const WaveContext ctx = WaveContext::make(s.domain(), k, j == 1 ? Formulation::MsOneThird : Formulation::MsKSquared);
      const ExactSolution u = plane_wave(k, {1.0, dim == 2 ? 1.0 : 0.0}, dim);
      const AssembledSystem sys = assemble_ms(s, ctx, ProblemData::from_exact(u, k));
      const SpdFactor D(assemble_weight(s, ctx, j));
      const ComplexVector x = direct_solve(sys.matrix, sys.rhs);
      for (PreconditionSide side : {PreconditionSide::Left, PreconditionSide::Right})
      {
        const GmresResult g = preconditioned_gmres(sys.matrix, sys.rhs, D, side, true, {tol, 5000});
        const double err = D.norm(ComplexVector(g.x - x)) / D.norm(x);
        o.check(g.converged && err <= 10.0 * tol, "d=" + std::to_string(dim) + " j=" + std::to_string(j) + " " +
                                                      to_string(side) + ": ||x_gmres - x_direct||_D / ||x||_D " +
                                                      fmt(err, 3) + " <= " + fmt(10 * tol));
      }
    }
  }
  return o;
}

struct Criterion
{
  std::string id;
  std::string title;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char **argv)
{
  const std::vector<Criterion> all{
      {"table1", "Projection table at k = 30 pi, n = 100 within 2%", 10.0, table1},
      {"coercivity", "Coercivity lambda_min >= gamma/4 - 1e-8", 120.0, coercivity},
      {"decomposition", "a0 = 0, b_Z decomposition and b_Z = b", 30.0, decomposition},
      {"norms", "Weight matrices reproduce V-norms; norm equivalence", 600.0, norms},
      {"accuracy", "Accuracy sweeps along hk^a = C", 600.0, accuracy},
      {"qo_ridge", "Quasi-optimality ridge exponent in [0.3, 0.5]", 900.0, qo_ridge},
      {"gmres_1d", "1-d GMRES iteration studies", 600.0, gmres_1d},
      {"gmres_2d", "2-d GMRES growth ordering", 1800.0, gmres_2d},
      {"indefiniteness", "Standard form indefinite at k = 2 pi", 600.0, indefiniteness},
      {"solver_oracles", "GMRES against dense oracle and direct solves", 600.0, solver_oracles},
  };

  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (!wanted.empty() && wanted.front() == "--list")
  {
    for (const auto &c : all) std::cout << c.id << "\n";
    return 0;
  }
  for (const auto &w : wanted)
  {
    if (std::none_of(all.begin(), all.end(), [&](const Criterion &c) { return c.id == w; }))
    {
      std::cerr << "unknown criterion '" << w << "'\n";
      return 2;
    }
  }

  int failures = 0;
  for (const auto &c : all)
  {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try
    {
      out = c.run();
    }
    catch (const std::exception &e)
    {
      out.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.check(secs <= c.budget_s, "runtime " + fmt(secs, 3) + " s <= " + fmt(c.budget_s, 4) + " s");
    for (const auto &n : out.notes) std::cout << "    " << n << "\n";
    std::cout << (out.pass ? "PASS " : "FAIL ") << c.id << ": " << c.title << " (" << fmt(secs, 3) << " s)"
              << std::endl;
    if (!out.pass) failures++;
  }
  return failures == 0 ? 0 : 1;
}
