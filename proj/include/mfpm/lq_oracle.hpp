#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "mfpm/csv.hpp"
#include "mfpm/errors.hpp"
#include "mfpm/lq.hpp"

namespace mfpm {

/// Riccati-based reference solution of an LQ mean-field problem, sampled on a
/// uniform grid of `steps` intervals.
///
/// Control problem (kind "mfc"):
///   v*(s, x) = -R^{-1} B' (Pi (x - xbar) + Gamma xbar + offset)
/// Game (kind "mfg"):
///   v*(s, x) = -R^{-1} B' (Pi x + Gamma xbar + offset)
/// where Gamma is the mean Riccati matrix (mfc) or the equilibrium mean
/// feedback Lambda (mfg). `mean` and `cov` are the moments of the optimally
/// controlled state and `cost` the social cost obtained by integrating them.
struct RiccatiSolution {
  std::string kind;
  double t0 = 0.0;
  double T = 0.0;
  std::vector<double> times;
  std::vector<Mat> Pi;
  std::vector<Mat> Gamma;
  std::vector<Vec> offset;
  std::vector<double> scalar;  // mfc only: constant term of the value
  std::vector<Vec> mean;
  std::vector<Mat> cov;
  std::vector<Mat> gain;       // -R^{-1} B' Pi
  Mat RinvBt;
  double value = 0.0;          // mfc: value-function formula; mfg: equals cost
  double cost = 0.0;

  std::size_t steps() const { return times.size() - 1; }

  /// Linear interpolation weight for time s.
  std::pair<std::size_t, double> locate(double s) const
  {
    if (times.size() == 1 || s <= t0) return {0, 0.0};
    if (s >= T) return {steps() - 1, 1.0};
    const double u = (s - t0) / (T - t0) * static_cast<double>(steps());
    auto i = static_cast<std::size_t>(std::floor(u));
    if (i >= steps()) i = steps() - 1;
    return {i, u - static_cast<double>(i)};
  }
  template <typename M>
  M interp(const std::vector<M>& xs, double s) const
  {
    const auto [i, a] = locate(s);
    if (xs.size() == 1) return xs[0];
    return (1.0 - a) * xs[i] + a * xs[i + 1];
  }

  Mat Pi_at(double s) const { return interp(Pi, s); }
  Mat Gamma_at(double s) const { return interp(Gamma, s); }
  Vec offset_at(double s) const { return interp(offset, s); }
  Vec mean_at(double s) const { return interp(mean, s); }

  /// Optimal (mfc) or equilibrium (mfg) feedback given the current law mean.
  Vec feedback(double s, const Vec& x, const Vec& xbar) const
  {
    const Mat P = Pi_at(s);
    const Vec inner = kind == "mfc" ? Vec(P * (x - xbar) + Gamma_at(s) * xbar + offset_at(s))
                                    : Vec(P * x + Gamma_at(s) * xbar + offset_at(s));
    return -RinvBt * inner;
  }
  /// Feedback evaluated along the oracle mean path.
  Vec feedback(double s, const Vec& x) const { return feedback(s, x, mean_at(s)); }
};

namespace detail {

struct LQData {
  int n, d;
  Vec f0;
  Mat A, Ahat, B, M, RinvBt, R;
  Mat sig0;
  std::vector<Mat> C, Chat, Cbar;
  Mat Q, S, Qhat, H, HS, Hhat;
  bool noise;
};

inline LQData prepare_lq(const LQSpec& in)
{
  LQSpec spec = in;
  if (spec.T == spec.t0) spec.T = spec.t0 + 1.0;  // shape checks only
  spec.validate();
  for (const auto& Dj : spec.D)
    if (!Dj.isZero(0.0)) throw UnsupportedCouplingError("Riccati oracle requires control-free volatility (D_j = 0)");
  LQData o;
  o.n = spec.n;
  o.d = spec.d;
  o.f0 = spec.f0;
  o.A = spec.A;
  o.Ahat = spec.A + spec.Abar;
  o.B = spec.B;
  o.R = spec.R;
  const Eigen::LLT<Mat> llt(spec.R);
  o.RinvBt = llt.solve(spec.B.transpose());
  o.M = spec.B * o.RinvBt;
  o.M = 0.5 * (o.M + o.M.transpose());
  o.sig0 = spec.sigma0;
  const Mat zero = Mat::Zero(o.n, o.n);
  for (int j = 0; j < o.n; ++j) {
    const Mat Cj = spec.C.empty() ? zero : spec.C[static_cast<std::size_t>(j)];
    const Mat Cbj = spec.Cbar.empty() ? zero : spec.Cbar[static_cast<std::size_t>(j)];
    o.C.push_back(Cj);
    o.Cbar.push_back(Cbj);
    o.Chat.push_back(Cj + Cbj);
  }
  o.noise = spec.has_noise();
  auto sym = [](const Mat& m) -> Mat { return 0.5 * (m + m.transpose()); };
  o.Q = sym(spec.Q);
  o.S = spec.S;
  o.Qhat = o.Q + o.S + o.S.transpose() + sym(spec.Qbar);
  o.H = sym(spec.H);
  o.HS = spec.HS;
  o.Hhat = o.H + o.HS + o.HS.transpose() + sym(spec.Hbar);
  return o;
}

// Backward state: Pi, Gamma (or Lambda), offset, scalar.
struct BackState {
  Mat Pi, G;
  Vec off;
  double c = 0.0;

  BackState operator+(const BackState& o) const { return {Pi + o.Pi, G + o.G, off + o.off, c + o.c}; }
  BackState operator*(double a) const { return {a * Pi, a * G, a * off, a * c}; }
};

// Time derivative d/ds (not -d/ds) of the backward system.
inline BackState back_rhs_mfc(const LQData& o, const BackState& x)
{
  BackState r;
  Mat pi = x.Pi * o.A + o.A.transpose() * x.Pi + o.Q - x.Pi * o.M * x.Pi;
  Mat ga = x.G * o.Ahat + o.Ahat.transpose() * x.G + o.Qhat - x.G * o.M * x.G;
  Vec off = (o.Ahat - o.M * x.G).transpose() * x.off + x.G * o.f0;
  double c = x.off.dot(o.f0) - 0.5 * x.off.dot(o.M * x.off);
  for (int j = 0; j < o.n; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const Vec cj = o.sig0.col(j);
    pi += o.C[ju].transpose() * x.Pi * o.C[ju];
    ga += o.Chat[ju].transpose() * x.Pi * o.Chat[ju];
    off += o.Chat[ju].transpose() * x.Pi * cj;
    c += 0.5 * cj.dot(x.Pi * cj);
  }
  r.Pi = -0.5 * (pi + pi.transpose());
  r.G = -0.5 * (ga + ga.transpose());
  r.off = -off;
  r.c = -c;
  return r;
}

inline BackState back_rhs_mfg(const LQData& o, const BackState& x)
{
  BackState r;
  Mat pi = x.Pi * o.A + o.A.transpose() * x.Pi + o.Q - x.Pi * o.M * x.Pi;
  const Mat Acl = o.A - o.M * x.Pi;
  Mat la = x.G * o.Ahat - x.G * o.M * (x.Pi + x.G) + Acl.transpose() * x.G + x.Pi * (o.Ahat - o.A) + o.S;
  Vec ps = x.G * o.f0 - x.G * o.M * x.off + Acl.transpose() * x.off + x.Pi * o.f0;
  for (int j = 0; j < o.n; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    pi += o.C[ju].transpose() * x.Pi * o.C[ju];
    la += o.C[ju].transpose() * x.Pi * o.Cbar[ju];
    ps += o.C[ju].transpose() * x.Pi * o.sig0.col(j);
  }
  r.Pi = -0.5 * (pi + pi.transpose());
  r.G = -la;
  r.off = -ps;
  r.c = 0.0;
  return r;
}

inline void check_finite(const BackState& x, double s)
{
  const double big = 1e12;
  const bool ok = x.Pi.allFinite() && x.G.allFinite() && x.off.allFinite() && std::isfinite(x.c) &&
                  x.Pi.cwiseAbs().maxCoeff() < big && x.G.cwiseAbs().maxCoeff() < big;
  if (!ok) throw OracleBlowUpError("Riccati solution escapes at s = " + std::to_string(s));
}

// Forward moment state: mean, covariance, accumulated cost.
struct FwdState {
  Vec m;
  Mat P;
  double J = 0.0;

  FwdState operator+(const FwdState& o) const { return {m + o.m, P + o.P, J + o.J}; }
  FwdState operator*(double a) const { return {a * m, a * P, a * J}; }
};

inline FwdState fwd_rhs(const LQData& o, bool mfc, const BackState& b, const FwdState& x)
{
  const Mat K = -o.RinvBt * b.Pi;
  const Mat Gm = mfc ? b.G : Mat(b.Pi + b.G);
  const Vec vbar = -o.RinvBt * (Gm * x.m + b.off);
  FwdState r;
  r.m = o.f0 + o.Ahat * x.m + o.B * vbar;
  const Mat Acl = o.A + o.B * K;
  Mat dP = Acl * x.P + x.P * Acl.transpose();
  for (int j = 0; j < o.n; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const Vec e = o.sig0.col(j) + o.Chat[ju] * x.m;
    dP += o.C[ju] * x.P * o.C[ju].transpose() + e * e.transpose();
  }
  r.P = 0.5 * (dP + dP.transpose());
  r.J = 0.5 * (o.Q * x.P).trace() + 0.5 * x.m.dot(o.Qhat * x.m) + 0.5 * (K.transpose() * o.R * K * x.P).trace() +
        0.5 * vbar.dot(o.R * vbar);
  return r;
}

inline RiccatiSolution solve_lq(const LQSpec& spec, std::size_t K, std::size_t substeps, bool mfc)
{
  if (K == 0 || substeps == 0) throw DimensionError("oracle needs a positive number of steps and substeps");
  if (spec.T < spec.t0) throw DimensionError("oracle needs T >= t0");
  const LQData o = prepare_lq(spec);
  const int n = o.n;
  RiccatiSolution sol;
  sol.kind = mfc ? "mfc" : "mfg";
  sol.t0 = spec.t0;
  sol.T = spec.T;
  sol.RinvBt = o.RinvBt;
  const bool empty = spec.T == spec.t0;
  const std::size_t M = empty ? 0 : K * substeps;
  const double h = empty ? 0.0 : (spec.T - spec.t0) / static_cast<double>(M);

  // backward on the half-step grid so the forward RK4 sees midpoint values
  const std::size_t M2 = 2 * M;
  const double h2 = 0.5 * h;
  std::vector<BackState> back(M2 + 1);
  BackState cur{o.H, mfc ? o.Hhat : o.HS, Vec::Zero(n), 0.0};
  back[M2] = cur;
  auto rhs = [&](const BackState& x) { return mfc ? back_rhs_mfc(o, x) : back_rhs_mfg(o, x); };
  for (std::size_t k = M2; k > 0; --k) {
    const BackState k1 = rhs(cur);
    const BackState k2 = rhs(cur + k1 * (-0.5 * h2));
    const BackState k3 = rhs(cur + k2 * (-0.5 * h2));
    const BackState k4 = rhs(cur + k3 * (-h2));
    cur = cur + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (-h2 / 6.0);
    check_finite(cur, spec.t0 + static_cast<double>(k - 1) * h2);
    back[k - 1] = cur;
  }

  FwdState f{spec.initial_mean, spec.initial_cov, 0.0};
  auto record = [&](std::size_t i, const FwdState& fs) {
    const BackState& b = back[2 * i];
    sol.times.push_back(spec.t0 + static_cast<double>(i) * h);
    sol.Pi.push_back(b.Pi);
    sol.Gamma.push_back(b.G);
    sol.offset.push_back(b.off);
    if (mfc) sol.scalar.push_back(b.c);
    sol.mean.push_back(fs.m);
    sol.cov.push_back(fs.P);
    sol.gain.push_back(-o.RinvBt * b.Pi);
  };
  record(0, f);
  for (std::size_t i = 0; i < M; ++i) {
    const FwdState k1 = fwd_rhs(o, mfc, back[2 * i], f);
    const FwdState k2 = fwd_rhs(o, mfc, back[2 * i + 1], f + k1 * (0.5 * h));
    const FwdState k3 = fwd_rhs(o, mfc, back[2 * i + 1], f + k2 * (0.5 * h));
    const FwdState k4 = fwd_rhs(o, mfc, back[2 * i + 2], f + k3 * h);
    f = f + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if (!f.m.allFinite() || !f.P.allFinite() || !std::isfinite(f.J))
      throw OracleBlowUpError("moment equations escape at s = " + std::to_string(spec.t0 + static_cast<double>(i + 1) * h));
    record(i + 1, f);
  }
  const Vec& mT = f.m;
  sol.cost = f.J + 0.5 * (o.H * f.P).trace() + 0.5 * mT.dot(o.Hhat * mT);

  if (mfc) {
    const BackState& b0 = back[0];
    const Vec& m0 = spec.initial_mean;
    sol.value = 0.5 * (b0.Pi * spec.initial_cov).trace() + 0.5 * m0.dot(b0.G * m0) + b0.off.dot(m0) + b0.c;
  } else {
    sol.value = sol.cost;
  }
  return sol;
}

}  // namespace detail

/// Mean-field control: state Riccati Pi, mean Riccati Gamma, offset phi and
/// constant chi integrated backward with RK4 at K * substeps resolution.
inline RiccatiSolution solve_lq_mfc(const LQSpec& spec, std::size_t K, std::size_t substeps = 10)
{
  return detail::solve_lq(spec, K, substeps, true);
}

/// Mean-field game equilibrium: the representative agent's Riccati Pi and the
/// mean-consistency feedback Lambda, psi (linear ODE once Pi is known).
inline RiccatiSolution solve_lq_mfg(const LQSpec& spec, std::size_t K, std::size_t substeps = 10)
{
  return detail::solve_lq(spec, K, substeps, false);
}

/// Gain schedule CSV: time, Pi, Gamma, offset, mean, gain entries (row-major).
inline void write_riccati_csv(const RiccatiSolution& sol, std::ostream& os)
{
  CsvWriter w(os);
  const auto n = sol.Pi.front().rows();
  const auto d = sol.gain.front().rows();
  std::vector<std::string> head{"time"};
  auto mat_names = [&](const std::string& pre, Eigen::Index r, Eigen::Index c) {
    for (Eigen::Index a = 0; a < r; ++a)
      for (Eigen::Index b = 0; b < c; ++b) head.push_back(pre + "_" + std::to_string(a) + "_" + std::to_string(b));
  };
  mat_names("pi", n, n);
  mat_names(sol.kind == "mfc" ? "gamma" : "lambda", n, n);
  for (Eigen::Index a = 0; a < n; ++a) head.push_back("offset_" + std::to_string(a));
  for (Eigen::Index a = 0; a < n; ++a) head.push_back("mean_" + std::to_string(a));
  mat_names("gain", d, n);
  w.header(head);
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    w.field(sol.times[i]);
    auto mat = [&](const Mat& m) {
      for (Eigen::Index a = 0; a < m.rows(); ++a)
        for (Eigen::Index b = 0; b < m.cols(); ++b) w.field(m(a, b));
    };
    mat(sol.Pi[i]);
    mat(sol.Gamma[i]);
    for (Eigen::Index a = 0; a < n; ++a) w.field(sol.offset[i](a));
    for (Eigen::Index a = 0; a < n; ++a) w.field(sol.mean[i](a));
    mat(sol.gain[i]);
    w.end_row();
  }
}

}  // namespace mfpm
