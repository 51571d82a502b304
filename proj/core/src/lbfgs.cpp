#include <cmath>
#include <deque>
#include <limits>

#include "mgcsl/errors.hpp"
#include "mgcsl/optimizer.hpp"

namespace mgcsl::opt {

Bounds Bounds::unbounded(Eigen::Index n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Point {
  Vector x;
  double f = kInf;
  Vector g;
  double slope = 0.0;  // directional derivative along the path
};

class Problem {
 public:
  Problem(const Objective& fn, const Bounds& bounds, const LbfgsOptions& options, LbfgsResult& result)
      : fn_(fn), bounds_(bounds), options_(options), result_(result) {}

  bool exhausted() const { return result_.evaluations >= options_.max_evals; }
  bool bounded() const { return !bounds_.empty(); }

  void clamp(Vector& x) const {
    if (bounded()) x = x.cwiseMax(bounds_.lower).cwiseMin(bounds_.upper);
  }

  // Gradient with entries zeroed where a bound blocks descent.
  Vector free_part(const Vector& x, const Vector& v, const Vector& g) const {
    if (!bounded()) return v;
    Vector out = v;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if ((x(i) <= bounds_.lower(i) && g(i) > 0.0) || (x(i) >= bounds_.upper(i) && g(i) < 0.0) ||
          bounds_.lower(i) == bounds_.upper(i)) {
        out(i) = 0.0;
      }
    }
    return out;
  }

  // Derivative of f(P(x0 + t d)) at the trial point: coordinates clipped by
  // the projection do not move.
  double path_slope(const Vector& x0, const Vector& dir, double step, const Vector& g) const {
    if (!bounded()) return g.dot(dir);
    double slope = 0.0;
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
      const double raw = x0(i) + step * dir(i);
      if (raw > bounds_.lower(i) && raw < bounds_.upper(i)) slope += g(i) * dir(i);
    }
    return slope;
  }

  void eval(Point& pt) {
    clamp(pt.x);
    pt.g.resize(pt.x.size());
    pt.f = fn_(pt.x, pt.g);
    if (!std::isfinite(pt.f) || !pt.g.allFinite()) pt.f = kInf;
    ++result_.evaluations;
    if (pt.f < best_f_) {
      best_f_ = pt.f;
      result_.x = pt.x;
      result_.f = pt.f;
    }
    result_.best_history.push_back(best_f_);
  }

 private:
  const Objective& fn_;
  const Bounds& bounds_;
  const LbfgsOptions& options_;
  LbfgsResult& result_;
  double best_f_ = kInf;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), or NaN.
double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  return b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
}

class LineSearch {
 public:
  LineSearch(Problem& pb, const LbfgsOptions& opt, const Point& start, const Vector& dir)
      : pb_(pb), opt_(opt), start_(start), dir_(dir) {}

  bool run(double step, Point& out) {
    Point prev;
    prev.f = start_.f;
    prev.slope = start_.slope;
    double prev_step = 0.0;
    for (int i = 0; i < opt_.max_line_search; ++i) {
      if (pb_.exhausted()) break;
      Point cur = trial(step);
      if (!std::isfinite(cur.f) || armijo_fails(cur) || (i > 0 && cur.f >= prev.f)) {
        return zoom(prev_step, prev, step, cur, out);
      }
      if (std::abs(cur.slope) <= -opt_.c2 * start_.slope) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(step, cur, prev_step, prev, out);
      remember(cur);
      prev_step = step;
      prev = std::move(cur);
      step *= 2.0;
    }
    return fallback(out);
  }

 private:
  Point trial(double step) {
    Point p;
    p.x = start_.x + step * dir_;
    pb_.eval(p);
    p.slope = std::isfinite(p.f) ? pb_.path_slope(start_.x, dir_, step, p.g) : 0.0;
    return p;
  }

  // Sufficient decrease measured along the actual (projected) displacement.
  bool armijo_fails(const Point& p) const {
    return p.f > start_.f + opt_.c1 * start_.g.dot(p.x - start_.x);
  }

  void remember(const Point& p) {
    if (std::isfinite(p.f) && p.f < start_.f && (!have_decrease_ || p.f < decrease_.f)) {
      decrease_ = p;
      have_decrease_ = true;
    }
  }

  bool zoom(double lo, Point plo, double hi, Point phi, Point& out) {
    for (int i = 0; i < opt_.max_line_search; ++i) {
      if (pb_.exhausted()) break;
      const double width = hi - lo;
      if (std::abs(width) < 1e-16 * std::max(1.0, std::abs(lo))) break;
      double step = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(phi.f)) step = cubic_min(lo, plo.f, plo.slope, hi, phi.f, phi.slope);
      const double low = std::min(lo, hi) + 0.1 * std::abs(width);
      const double high = std::max(lo, hi) - 0.1 * std::abs(width);
      if (!std::isfinite(step) || step < low || step > high) step = lo + 0.5 * width;

      Point cur = trial(step);
      if (!std::isfinite(cur.f) || armijo_fails(cur) || cur.f >= plo.f) {
        hi = step;
        phi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -opt_.c2 * start_.slope) {
          out = std::move(cur);
          return true;
        }
        remember(cur);
        if (cur.slope * (hi - lo) >= 0.0) {
          hi = lo;
          phi = plo;
        }
        lo = step;
        plo = std::move(cur);
      }
    }
    return fallback(out);
  }

  bool fallback(Point& out) {
    if (!have_decrease_) return false;
    out = decrease_;
    return true;
  }

  Problem& pb_;
  const LbfgsOptions& opt_;
  const Point& start_;
  const Vector& dir_;
  Point decrease_;
  bool have_decrease_ = false;
};

struct Pair {
  Vector s, y;
  double rho;
};

Vector two_loop(const std::deque<Pair>& memory, const Vector& g) {
  Vector q = g;
  std::vector<double> alpha(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    alpha[k] = memory[k].rho * memory[k].s.dot(q);
    q -= alpha[k] * memory[k].y;
  }
  if (!memory.empty()) {
    const Pair& last = memory.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const double beta = memory[k].rho * memory[k].y.dot(q);
    q += (alpha[k] - beta) * memory[k].s;
  }
  return -q;
}

}  // namespace

LbfgsResult inner_minimize(const Objective& objective, const Vector& x0, const LbfgsOptions& options,
                           const Bounds& bounds) {
  if (!bounds.empty() && (bounds.lower.size() != x0.size() || bounds.upper.size() != x0.size())) {
    throw ShapeError("inner_minimize: bounds do not match the parameter count");
  }
  LbfgsResult result;
  result.x = x0;
  result.f = std::numeric_limits<double>::quiet_NaN();
  if (options.max_evals <= 0) {
    result.stop_reason = "budget";
    return result;
  }
  Problem pb(objective, bounds, options, result);

  Point cur;
  cur.x = x0;
  pb.eval(cur);
  if (!std::isfinite(cur.f)) {
    result.x = cur.x;
    result.f = std::numeric_limits<double>::quiet_NaN();
    result.stop_reason = "non-finite start";
    return result;
  }

  std::deque<Pair> memory;
  int failures = 0;
  while (true) {
    const Vector pg = pb.free_part(cur.x, cur.g, cur.g);
    if (pg.lpNorm<Eigen::Infinity>() <= options.pgtol) {
      result.stop_reason = "pgtol";
      break;
    }
    if (pb.exhausted()) {
      result.stop_reason = "budget";
      break;
    }
    Vector dir = pb.free_part(cur.x, two_loop(memory, pg), cur.g);
    cur.slope = cur.g.dot(dir);
    if (!(cur.slope < 0.0)) {
      memory.clear();
      dir = -pg;
      cur.slope = -pg.squaredNorm();
    }
    const double step = memory.empty() ? std::min(1.0, 1.0 / pg.norm()) : 1.0;

    Point next;
    LineSearch ls(pb, options, cur, dir);
    if (!ls.run(step, next)) {
      if (pb.exhausted()) {
        result.stop_reason = "budget";
        break;
      }
      if (++failures >= 2 || memory.empty()) {
        result.line_search_warning = true;
        result.stop_reason = "line search";
        break;
      }
      memory.clear();
      continue;
    }
    failures = 0;
    ++result.iterations;

    Pair pair{next.x - cur.x, next.g - cur.g, 0.0};
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-10 * pair.y.squaredNorm() && sy > 0.0) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }
    const double drop = cur.f - next.f;
    const double scale = std::max({std::abs(cur.f), std::abs(next.f), 1.0});
    cur = std::move(next);
    if (drop <= options.ftol * scale) {
      result.stop_reason = "ftol";
      break;
    }
  }
  return result;
}

}  // namespace mgcsl::opt
