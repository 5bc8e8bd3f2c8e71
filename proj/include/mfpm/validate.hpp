#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfpm/errors.hpp"
#include "mfpm/problem.hpp"

namespace mfpm {

/// Result of one sampled check (one derivative, one inequality, ...).
struct CheckEntry {
  std::string name;
  bool passed = true;
  std::size_t samples = 0;
  /// Largest error relative to the allowed error (derivative checks: <= 1
  /// passes) or smallest inequality margin (convexity/monotonicity: >= -1e-9
  /// passes).
  double worst = 0.0;
  double worst_abs_error = 0.0;
  std::size_t worst_sample = 0;
  nlohmann::json witness;
};

struct CheckReport {
  std::string check;
  bool passed = true;
  std::size_t samples = 0;
  std::vector<CheckEntry> entries;
  std::string note;

  void add(CheckEntry e)
  {
    passed = passed && e.passed;
    entries.push_back(std::move(e));
  }
  const CheckEntry* find(const std::string& name) const
  {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
  const CheckEntry* first_failure() const
  {
    for (const auto& e : entries)
      if (!e.passed) return &e;
    return nullptr;
  }
};

inline nlohmann::json to_json(const CheckEntry& e)
{
  nlohmann::json j;
  j["name"] = e.name;
  j["passed"] = e.passed;
  j["samples"] = e.samples;
  j["worst"] = e.worst;
  j["worst_abs_error"] = e.worst_abs_error;
  j["worst_sample"] = e.worst_sample;
  j["witness"] = e.witness.is_null() ? nlohmann::json::object() : e.witness;
  return j;
}

inline nlohmann::json to_json(const CheckReport& r)
{
  nlohmann::json j;
  j["check"] = r.check;
  j["passed"] = r.passed;
  j["samples"] = r.samples;
  j["note"] = r.note;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : r.entries) j["entries"].push_back(to_json(e));
  return j;
}

/// Throws the error type matching the check family if the report failed.
inline void enforce(const CheckReport& r)
{
  const CheckEntry* bad = r.first_failure();
  if (!bad) return;
  const std::string msg = r.check + " failed at '" + bad->name + "' (worst " + std::to_string(bad->worst) + ", sample " +
                          std::to_string(bad->worst_sample) + "): " + bad->witness.dump();
  if (r.check.rfind("convexity", 0) == 0) throw ConvexityError(msg);
  if (r.check.rfind("monotonicity", 0) == 0) throw MonotonicityError(msg);
  throw DerivativeMismatch(msg);
}

namespace detail {

inline nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline nlohmann::json mat_json(const Mat& m)
{
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

/// Random argument tuple used by the validators: standard normal x, v, xi;
/// uniform time; measures are standard normal clouds shifted by a random
/// normal offset.
struct SamplePoint {
  Vec x, x2, v, v2, xi, xi2;
  double s = 0.0;
  Mat m_points, m2_points;
};

inline SamplePoint draw_point(const ProblemSpec& p, Rng& rng, Eigen::Index atoms)
{
  SamplePoint pt;
  pt.x = standard_normal(p.n, rng);
  pt.x2 = standard_normal(p.n, rng);
  pt.v = standard_normal(p.d, rng);
  pt.v2 = standard_normal(p.d, rng);
  pt.xi = standard_normal(p.n, rng);
  pt.xi2 = standard_normal(p.n, rng);
  std::uniform_real_distribution<double> unif(p.t0, p.T);
  pt.s = unif(rng);
  pt.m_points = standard_normal(p.n, atoms, rng);
  pt.m2_points = standard_normal(p.n, atoms, rng);
  pt.m2_points.colwise() += standard_normal(p.n, rng);
  return pt;
}

// Tracks the worst-case error ratio of one derivative across samples.
struct ErrorTracker {
  CheckEntry entry;
  double tol;
  double floor;

  ErrorTracker(std::string name, double tol_, double floor_) : tol(tol_), floor(floor_) { entry.name = std::move(name); }

  void record(std::size_t sample, const Mat& supplied, const Mat& numeric, nlohmann::json where, double extra = 0.0)
  {
    ++entry.samples;
    const double err = (supplied - numeric).norm();
    const double scale = std::max(supplied.norm(), numeric.norm());
    const double allowed = std::max(tol * scale, floor) + extra;
    const double ratio = std::isfinite(err) ? err / allowed : std::numeric_limits<double>::infinity();
    if (entry.samples == 1 || ratio > entry.worst) {
      entry.worst = ratio;
      entry.worst_abs_error = err;
      entry.worst_sample = sample;
      where["supplied"] = mat_json(supplied);
      where["finite_difference"] = mat_json(numeric);
      entry.witness = std::move(where);
    }
    entry.passed = entry.passed && ratio <= 1.0;
  }
};

template <typename Fn>
Mat central_jacobian(Fn&& fn, const Vec& at, double h)
{
  Mat J;
  for (Eigen::Index c = 0; c < at.size(); ++c) {
    Vec plus = at, minus = at;
    plus(c) += h;
    minus(c) -= h;
    const Vec col = (fn(plus) - fn(minus)) / (2.0 * h);
    if (c == 0) J.resize(col.size(), at.size());
    J.col(c) = col;
  }
  return J;
}

inline Vec as_vec(double x) { return Vec::Constant(1, x); }

}  // namespace detail

/// Central finite differences of f, sigma^j, g, g_T in x and v against the
/// supplied Jacobians/gradients at random arguments. A derivative passes when
/// |fd - supplied| <= max(tol * max(|fd|, |supplied|), 1e-8) (Frobenius norms)
/// at every sample. Missing derivative callables count as zero.
inline CheckReport validate_pointwise_derivatives(const ProblemSpec& p, std::size_t samples = 32, double h = 1e-5,
                                                  double tol = 1e-6, std::uint64_t seed = 0)
{
  if (!(h > 0.0)) throw DerivativeMismatch("finite-difference step must be positive");
  CheckReport rep;
  rep.check = "pointwise_derivatives";
  rep.samples = samples;
  rep.note = "sampled on standard normal x, v and 16-atom clouds; growth outside the sampled region is not checked";
  Rng rng = stream_rng(seed, Stream::validation);
  const double floor = 1e-8;

  detail::ErrorTracker fx("D_x f", tol, floor), fv("D_v f", tol, floor), gx("D_x g", tol, floor), gv("D_v g", tol, floor),
      tx("D_x g_T", tol, floor);
  std::vector<detail::ErrorTracker> sx, sv;
  for (int j = 0; j < p.n; ++j) {
    sx.emplace_back("D_x sigma^" + std::to_string(j), tol, floor);
    sv.emplace_back("D_v sigma^" + std::to_string(j), tol, floor);
  }

  for (std::size_t k = 0; k < samples; ++k) {
    const auto pt = detail::draw_point(p, rng, 16);
    const EmpiricalMeasure m = EmpiricalMeasure::uniform(pt.m_points);
    const Vec& x = pt.x;
    const Vec& v = pt.v;
    const double s = pt.s;
    nlohmann::json where = {{"x", detail::vec_json(x)}, {"v", detail::vec_json(v)}, {"s", s}};

    if (p.drift) {
      const Mat a = p.drift_dx ? p.drift_dx(x, m, v, s) : Mat::Zero(p.n, p.n);
      fx.record(k, a, detail::central_jacobian([&](const Vec& y) { return p.drift(y, m, v, s); }, x, h), where);
      const Mat b = p.drift_dv ? p.drift_dv(x, m, v, s) : Mat::Zero(p.n, p.d);
      fv.record(k, b, detail::central_jacobian([&](const Vec& u) { return p.drift(x, m, u, s); }, v, h), where);
    }
    if (p.volatility) {
      for (int j = 0; j < p.n; ++j) {
        const Mat a = p.volatility_dx ? p.volatility_dx(x, m, v, s, j) : Mat::Zero(p.n, p.n);
        sx[static_cast<std::size_t>(j)].record(
            k, a, detail::central_jacobian([&](const Vec& y) -> Vec { return p.volatility(y, m, v, s).col(j); }, x, h), where);
        const Mat b = p.volatility_dv ? p.volatility_dv(x, m, v, s, j) : Mat::Zero(p.n, p.d);
        sv[static_cast<std::size_t>(j)].record(
            k, b, detail::central_jacobian([&](const Vec& u) -> Vec { return p.volatility(x, m, u, s).col(j); }, v, h), where);
      }
    }
    if (p.running_cost) {
      const Vec a = p.running_cost_dx ? p.running_cost_dx(x, m, v, s) : Vec::Zero(p.n);
      gx.record(k, a,
                detail::central_jacobian([&](const Vec& y) { return detail::as_vec(p.running_cost(y, m, v, s)); }, x, h)
                    .transpose(),
                where);
      const Vec b = p.running_cost_dv ? p.running_cost_dv(x, m, v, s) : Vec::Zero(p.d);
      gv.record(k, b,
                detail::central_jacobian([&](const Vec& u) { return detail::as_vec(p.running_cost(x, m, u, s)); }, v, h)
                    .transpose(),
                where);
    }
    if (p.terminal_cost) {
      const Vec a = p.terminal_cost_dx ? p.terminal_cost_dx(x, m) : Vec::Zero(p.n);
      tx.record(k, a,
                detail::central_jacobian([&](const Vec& y) { return detail::as_vec(p.terminal_cost(y, m)); }, x, h).transpose(),
                where);
    }
  }
  if (p.drift) {
    rep.add(fx.entry);
    rep.add(fv.entry);
  }
  if (p.volatility) {
    for (auto& t : sx) rep.add(t.entry);
    for (auto& t : sv) rep.add(t.entry);
  }
  if (p.running_cost) {
    rep.add(gx.entry);
    rep.add(gv.entry);
  }
  if (p.terminal_cost) rep.add(tx.entry);
  return rep;
}

enum class CoefficientTag { drift, volatility, running_cost, terminal_cost };

inline std::string to_string(CoefficientTag t)
{
  switch (t) {
    case CoefficientTag::drift: return "f";
    case CoefficientTag::volatility: return "sigma";
    case CoefficientTag::running_cost: return "g";
    case CoefficientTag::terminal_cost: return "g_T";
  }
  return "?";
}

/// Checks the measure derivatives of one coefficient on random empirical
/// measures:
///  - "flat": the mixture quotient (F(m + eps(m' - m)) - F(m)) / eps,
///    Richardson-extrapolated from eps and eps/2, against
///    int dF/dnu(m)(xi) d(m' - m)(xi)            [scalar costs only]
///  - "xi-gradient": central differences of dF/dnu(m)(.) against the supplied
///    Dxi dF/dnu                                  [scalar costs only]
///  - "L-derivative": moving atom y of m by +-h e_b changes F by
///    2 h w_y Dxi dF/dnu(m)(x_y) e_b              [all coefficients]
/// Passing means |numeric - supplied| <= tol * max(1, scale) per sample.
inline CheckReport validate_measure_derivative(const ProblemSpec& p, CoefficientTag tag, std::size_t samples = 16,
                                               double eps = 1e-3, double tol = 1e-6, std::uint64_t seed = 0)
{
  if (!(eps > 0.0 && eps < 1.0)) throw DerivativeMismatch("mixture step must lie in (0, 1)");
  CheckReport rep;
  rep.check = "measure_derivative:" + to_string(tag);
  rep.samples = samples;
  Rng rng = stream_rng(seed + 1000 * static_cast<std::uint64_t>(tag), Stream::validation);
  const Eigen::Index atoms = 16;
  const double h = 1e-5;
  const double floor = tol;  // tol * max(1, scale)

  const bool scalar = tag == CoefficientTag::running_cost || tag == CoefficientTag::terminal_cost;
  detail::ErrorTracker flat_t("flat", tol, floor), grad_t("xi-gradient", tol, floor), lder_t("L-derivative", tol, floor);

  for (std::size_t k = 0; k < samples; ++k) {
    const auto pt = detail::draw_point(p, rng, atoms);
    const EmpiricalMeasure m = EmpiricalMeasure::uniform(pt.m_points);
    const EmpiricalMeasure m2 = EmpiricalMeasure::uniform(pt.m2_points);
    const Vec& x = pt.x;
    const Vec& v = pt.v;
    const double s = pt.s;
    nlohmann::json where = {{"x", detail::vec_json(x)}, {"v", detail::vec_json(v)}, {"s", s}};

    // F(measure) as a vector (scalar costs as length-1 vectors; volatility flattened)
    std::function<Vec(const EmpiricalMeasure&)> F;
    std::function<Mat(const EmpiricalMeasure&, const Vec&)> DF;  // rows = outputs of F, cols = xi
    std::function<double(const EmpiricalMeasure&, const Vec&)> flat;
    switch (tag) {
      case CoefficientTag::drift:
        if (!p.drift) continue;
        F = [&](const EmpiricalMeasure& mm) { return p.drift(x, mm, v, s); };
        DF = [&](const EmpiricalMeasure& mm, const Vec& xi) -> Mat {
          return p.drift_dmeasure ? p.drift_dmeasure(x, mm, v, s, xi) : Mat::Zero(p.n, p.n);
        };
        break;
      case CoefficientTag::volatility:
        if (!p.volatility) continue;
        F = [&](const EmpiricalMeasure& mm) -> Vec {
          const Mat sig = p.volatility(x, mm, v, s);
          return Eigen::Map<const Vec>(sig.data(), sig.size());
        };
        DF = [&](const EmpiricalMeasure& mm, const Vec& xi) -> Mat {
          Mat out = Mat::Zero(p.n * p.n, p.n);
          if (p.volatility_dmeasure)
            for (int j = 0; j < p.n; ++j) out.middleRows(p.n * j, p.n) = p.volatility_dmeasure(x, mm, v, s, xi, j);
          return out;
        };
        break;
      case CoefficientTag::running_cost:
        if (!p.running_cost) continue;
        F = [&](const EmpiricalMeasure& mm) { return detail::as_vec(p.running_cost(x, mm, v, s)); };
        DF = [&](const EmpiricalMeasure& mm, const Vec& xi) -> Mat {
          return p.running_cost_dmeasure ? Mat(p.running_cost_dmeasure(x, mm, v, s, xi).transpose()) : Mat::Zero(1, p.n);
        };
        if (p.running_cost_flat) flat = [&](const EmpiricalMeasure& mm, const Vec& xi) { return p.running_cost_flat(x, mm, v, s, xi); };
        break;
      case CoefficientTag::terminal_cost:
        if (!p.terminal_cost) continue;
        F = [&](const EmpiricalMeasure& mm) { return detail::as_vec(p.terminal_cost(x, mm)); };
        DF = [&](const EmpiricalMeasure& mm, const Vec& xi) -> Mat {
          return p.terminal_cost_dmeasure ? Mat(p.terminal_cost_dmeasure(x, mm, xi).transpose()) : Mat::Zero(1, p.n);
        };
        if (p.terminal_cost_flat) flat = [&](const EmpiricalMeasure& mm, const Vec& xi) { return p.terminal_cost_flat(x, mm, xi); };
        break;
    }

    if (scalar && flat) {
      const double F0 = F(m)(0);
      auto quotient = [&](double e) { return (F(EmpiricalMeasure::mixture(m, m2, e))(0) - F0) / e; };
      const double q = 2.0 * quotient(0.5 * eps) - quotient(eps);
      double expected = 0.0;
      for (Eigen::Index a = 0; a < atoms; ++a) expected += m2.weight(a) * flat(m, m2.point(a));
      for (Eigen::Index a = 0; a < atoms; ++a) expected -= m.weight(a) * flat(m, m.point(a));
      // cancellation in F(m_eps) - F(m) divided by eps
      const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(F0)) / eps;
      flat_t.record(k, detail::as_vec(expected), detail::as_vec(q), where, roundoff);

      const Mat supplied = DF(m, pt.xi);
      const Mat numeric = detail::central_jacobian([&](const Vec& xi) { return detail::as_vec(flat(m, xi)); }, pt.xi, h);
      grad_t.record(k, supplied, numeric, where);
    }

    // L-derivative identity on one atom
    const Eigen::Index y = static_cast<Eigen::Index>(k % static_cast<std::size_t>(atoms));
    const Vec xy = m.point(y);
    const Mat supplied = DF(m, xy);
    Mat numeric(supplied.rows(), p.n);
    for (int b = 0; b < p.n; ++b) {
      Mat plus = m.points(), minus = m.points();
      plus(b, y) += h;
      minus(b, y) -= h;
      numeric.col(b) = (F(EmpiricalMeasure(plus, m.weights())) - F(EmpiricalMeasure(minus, m.weights()))) / (2.0 * h * m.weight(y));
    }
    lder_t.record(k, supplied, numeric, where);
  }
  if (scalar && flat_t.entry.samples > 0) {
    rep.add(flat_t.entry);
    rep.add(grad_t.entry);
  }
  if (lder_t.entry.samples > 0) rep.add(lder_t.entry);
  if (scalar && flat_t.entry.samples == 0) rep.note = "no flat derivative supplied; only the L-derivative identity was checked";
  return rep;
}

enum class ConvexityMode { control_only, joint };

namespace detail {

struct MarginTracker {
  CheckEntry entry;
  void record(std::size_t sample, double margin, const nlohmann::json& witness)
  {
    ++entry.samples;
    if (entry.samples == 1 || margin < entry.worst) {
      entry.worst = margin;
      entry.worst_sample = sample;
      entry.witness = witness;
    }
    entry.passed = entry.passed && margin >= -1e-9;
  }
};

}  // namespace detail

/// Sampled certificate of strong convexity of the costs.
///
/// control_only: g(x,m,v',s) - g(x,m,v,s) - D_v g.(v'-v) - lambda|v'-v|^2 >= 0.
/// joint: additionally the joint inequality for g in (x, m, v), convexity of
/// dg/dnu in xi, the joint inequality for g_T in (x, m) and convexity of
/// dg_T/dnu in xi. Joint mode evaluates the control-only inequality on the
/// same samples, so passing in joint mode implies passing in control_only
/// mode. Missing flat derivatives count as zero.
inline CheckReport check_convexity_B3(const ProblemSpec& p, ConvexityMode mode, std::size_t samples, double lambda,
                                      std::uint64_t seed = 0)
{
  if (!(lambda > 0.0)) throw ConvexityError("lambda must be positive");
  CheckReport rep;
  rep.check = mode == ConvexityMode::joint ? "convexity:joint" : "convexity:control-only";
  rep.samples = samples;
  rep.note = "sampled certificate, not a proof";
  Rng rng = stream_rng(seed, Stream::convexity);
  const Eigen::Index atoms = 16;

  detail::MarginTracker ctrl_t, joint_t, gflat_t, term_t, tflat_t;
  ctrl_t.entry.name = "g strongly convex in v";
  joint_t.entry.name = "g jointly convex in (x, m, v)";
  gflat_t.entry.name = "dg/dnu convex in xi";
  term_t.entry.name = "g_T jointly convex in (x, m)";
  tflat_t.entry.name = "dg_T/dnu convex in xi";

  auto integrate_flat = [&](const std::function<double(const Vec&)>& fl, const EmpiricalMeasure& to, const EmpiricalMeasure& from) {
    double acc = 0.0;
    for (Eigen::Index a = 0; a < to.size(); ++a) acc += to.weight(a) * fl(to.point(a));
    for (Eigen::Index a = 0; a < from.size(); ++a) acc -= from.weight(a) * fl(from.point(a));
    return acc;
  };

  for (std::size_t k = 0; k < samples; ++k) {
    const auto pt = detail::draw_point(p, rng, atoms);
    const EmpiricalMeasure m = EmpiricalMeasure::uniform(pt.m_points);
    const EmpiricalMeasure m2 = EmpiricalMeasure::uniform(pt.m2_points);
    const Vec &x = pt.x, &x2 = pt.x2, &v = pt.v, &v2 = pt.v2;
    const double s = pt.s;
    const Vec dv = v2 - v;
    nlohmann::json w = {{"x", detail::vec_json(x)}, {"x_prime", detail::vec_json(x2)}, {"v", detail::vec_json(v)},
                        {"v_prime", detail::vec_json(dv + v)}, {"s", s}};

    if (p.running_cost) {
      const Vec gv = p.running_cost_dv ? p.running_cost_dv(x, m, v, s) : Vec::Zero(p.d);
      const double margin =
          p.running_cost(x, m, v2, s) - p.running_cost(x, m, v, s) - gv.dot(dv) - lambda * dv.squaredNorm();
      ctrl_t.record(k, margin, w);
    }
    if (mode != ConvexityMode::joint) continue;

    nlohmann::json wj = w;
    wj["m"] = detail::mat_json(m.points());
    wj["m_prime"] = detail::mat_json(m2.points());
    if (p.running_cost) {
      const Vec gx = p.running_cost_dx ? p.running_cost_dx(x, m, v, s) : Vec::Zero(p.n);
      const Vec gv = p.running_cost_dv ? p.running_cost_dv(x, m, v, s) : Vec::Zero(p.d);
      std::function<double(const Vec&)> fl = [&](const Vec& xi) {
        return p.running_cost_flat ? p.running_cost_flat(x, m, v, s, xi) : 0.0;
      };
      const double margin = p.running_cost(x2, m2, v2, s) - p.running_cost(x, m, v, s) - gx.dot(x2 - x) -
                            integrate_flat(fl, m2, m) - gv.dot(dv) - lambda * dv.squaredNorm();
      joint_t.record(k, margin, wj);
      if (p.running_cost_flat) {
        const Vec d = p.running_cost_dmeasure ? p.running_cost_dmeasure(x, m, v, s, pt.xi) : Vec::Zero(p.n);
        const double fm = fl(pt.xi2) - fl(pt.xi) - d.dot(pt.xi2 - pt.xi);
        nlohmann::json wx = w;
        wx["xi"] = detail::vec_json(pt.xi);
        wx["xi_prime"] = detail::vec_json(pt.xi2);
        gflat_t.record(k, fm, wx);
      }
    }
    if (p.terminal_cost) {
      const Vec tx = p.terminal_cost_dx ? p.terminal_cost_dx(x, m) : Vec::Zero(p.n);
      std::function<double(const Vec&)> fl = [&](const Vec& xi) {
        return p.terminal_cost_flat ? p.terminal_cost_flat(x, m, xi) : 0.0;
      };
      const double margin = p.terminal_cost(x2, m2) - p.terminal_cost(x, m) - tx.dot(x2 - x) - integrate_flat(fl, m2, m);
      term_t.record(k, margin, wj);
      if (p.terminal_cost_flat) {
        const Vec d = p.terminal_cost_dmeasure ? p.terminal_cost_dmeasure(x, m, pt.xi) : Vec::Zero(p.n);
        const double fm = fl(pt.xi2) - fl(pt.xi) - d.dot(pt.xi2 - pt.xi);
        nlohmann::json wx = w;
        wx["xi"] = detail::vec_json(pt.xi);
        wx["xi_prime"] = detail::vec_json(pt.xi2);
        tflat_t.record(k, fm, wx);
      }
    }
  }
  for (auto* t : {&ctrl_t, &joint_t, &gflat_t, &term_t, &tflat_t})
    if (t->entry.samples > 0) rep.add(t->entry);
  return rep;
}

enum class MonotonicityMode { displacement, lasry_lions };

inline std::string to_string(MonotonicityMode m)
{
  return m == MonotonicityMode::displacement ? "displacement" : "lasry-lions";
}

/// Displacement value sum_i w_i (D_x g_T(eta2_i, L2) - D_x g_T(eta1_i, L1)).(eta2_i - eta1_i)
/// for index-paired ensembles.
inline double displacement_value(const ProblemSpec& p, const Mat& eta1, const Mat& eta2)
{
  const EmpiricalMeasure L1 = EmpiricalMeasure::uniform(eta1);
  const EmpiricalMeasure L2 = EmpiricalMeasure::uniform(eta2);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < eta1.cols(); ++i) {
    const Vec a = eta1.col(i), b = eta2.col(i);
    acc += L1.weight(i) * (p.terminal_cost_dx(b, L2) - p.terminal_cost_dx(a, L1)).dot(b - a);
  }
  return acc;
}

/// Four-term value sum_i w_i [g_T(eta1_i, L1) + g_T(eta2_i, L2) - g_T(eta1_i, L2) - g_T(eta2_i, L1)].
inline double lasry_lions_value(const ProblemSpec& p, const Mat& eta1, const Mat& eta2)
{
  const EmpiricalMeasure L1 = EmpiricalMeasure::uniform(eta1);
  const EmpiricalMeasure L2 = EmpiricalMeasure::uniform(eta2);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < eta1.cols(); ++i) {
    const Vec a = eta1.col(i), b = eta2.col(i);
    acc += L1.weight(i) *
           (p.terminal_cost(a, L1) + p.terminal_cost(b, L2) - p.terminal_cost(a, L2) - p.terminal_cost(b, L1));
  }
  return acc;
}

/// Sampled monotonicity certificate for the terminal cost on random paired
/// ensembles eta1 = a1 + s1 Z1, eta2 = a2 + s2 Z2 (16 atoms each, random
/// offsets and scales). Passes when every value is >= -1e-9.
inline CheckReport check_monotonicity(const ProblemSpec& p, MonotonicityMode mode, std::size_t samples,
                                      std::uint64_t seed = 0, Eigen::Index atoms = 16)
{
  if (!p.terminal_cost) throw MonotonicityError("problem has no terminal cost");
  if (mode == MonotonicityMode::displacement && !p.terminal_cost_dx) throw MonotonicityError("displacement check needs D_x g_T");
  CheckReport rep;
  rep.check = "monotonicity:" + to_string(mode);
  rep.samples = samples;
  rep.note = "sampled certificate, not a proof";
  Rng rng = stream_rng(seed + (mode == MonotonicityMode::displacement ? 0 : 7919), Stream::monotonicity);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  detail::MarginTracker t;
  t.entry.name = to_string(mode);
  for (std::size_t k = 0; k < samples; ++k) {
    Mat eta1 = scale(rng) * standard_normal(p.n, atoms, rng);
    eta1.colwise() += standard_normal(p.n, rng);
    Mat eta2 = scale(rng) * standard_normal(p.n, atoms, rng);
    eta2.colwise() += standard_normal(p.n, rng);
    const double val =
        mode == MonotonicityMode::displacement ? displacement_value(p, eta1, eta2) : lasry_lions_value(p, eta1, eta2);
    t.record(k, val, {{"eta1", detail::mat_json(eta1)}, {"eta2", detail::mat_json(eta2)}, {"value", val}});
  }
  rep.add(t.entry);
  return rep;
}

}  // namespace mfpm
