#include "ipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdeep::detail {

SocScaling nt_scaling(const Vector& s, const Vector& z) {
  const Index k = s.size();
  auto jnorm = [](const Vector& u) {
    const double q = u(0) * u(0) - u.tail(u.size() - 1).squaredNorm();
    return std::sqrt(std::max(q, std::numeric_limits<double>::min()));
  };
  const double ns = jnorm(s);
  const double nz = jnorm(z);
  const Vector sb = s / ns;
  const Vector zb = z / nz;
  const double gamma = std::sqrt(std::max(0.5 * (1.0 + sb.dot(zb)), std::numeric_limits<double>::min()));
  Vector wb(k);
  wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
  wb.tail(k - 1) = (sb.tail(k - 1) - zb.tail(k - 1)) / (2.0 * gamma);
  SocScaling w;
  w.beta = std::sqrt(ns / nz);
  w.v = wb;
  w.v(0) += 1.0;
  w.v /= std::sqrt(2.0 * (wb(0) + 1.0));
  return w;
}

// W x = beta (2 v v'x - J x)
Vector soc_apply_w(const SocScaling& w, const Vector& x) {
  Vector r = 2.0 * w.v.dot(x) * w.v;
  r(0) -= x(0);
  r.tail(x.size() - 1) += x.tail(x.size() - 1);
  return w.beta * r;
}

// W^{-1} x = (2 J v v'J x - J x) / beta
Vector soc_apply_winv(const SocScaling& w, const Vector& x) {
  const Index k = x.size();
  const double vjx = w.v(0) * x(0) - w.v.tail(k - 1).dot(x.tail(k - 1));
  Vector r(k);
  r(0) = 2.0 * vjx * w.v(0) - x(0);
  r.tail(k - 1) = -2.0 * vjx * w.v.tail(k - 1) + x.tail(k - 1);
  return r / w.beta;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Layout {
  std::vector<Index> row;
  std::vector<double> sign;
  Vector h;
  std::vector<Index> q_off, q_dim;
  Index ml = 0;
  Index m = 0;
};

Layout make_layout(const CoreProblem& p) {
  Layout L;
  std::vector<double> h;
  for (Index r = 0; r < p.R.rows(); ++r) {
    if (std::isfinite(p.r_hi(r))) {
      L.row.push_back(r);
      L.sign.push_back(1.0);
      h.push_back(p.r_hi(r));
    }
    if (std::isfinite(p.r_lo(r))) {
      L.row.push_back(r);
      L.sign.push_back(-1.0);
      h.push_back(-p.r_lo(r));
    }
  }
  L.ml = static_cast<Index>(L.row.size());
  Index off = L.ml;
  for (const Matrix& G : p.soc_G) {
    L.q_off.push_back(off);
    L.q_dim.push_back(G.rows());
    off += G.rows();
  }
  L.m = off;
  L.h.resize(L.m);
  for (Index k = 0; k < L.ml; ++k) L.h(k) = h[static_cast<std::size_t>(k)];
  for (std::size_t q = 0; q < p.soc_h.size(); ++q) L.h.segment(L.q_off[q], L.q_dim[q]) = p.soc_h[q];
  return L;
}

struct Scaling {
  Vector wl;  // nonneg: sqrt(s/z)
  std::vector<SocScaling> q;
};

class Ops {
public:
  Ops(const CoreProblem& p, const Layout& L) : p_(p), L_(L) {
    const double cells = static_cast<double>(p.R.rows()) * static_cast<double>(p.R.cols());
    if (p.R.nonZeros() > 0.2 * cells) {
      Rdense_ = Matrix(p.R);
      dense_ = true;
    }
  }

  Vector Rx(const Vector& x) const { return dense_ ? Vector(Rdense_ * x) : Vector(p_.R * x); }
  Vector Rtx(const Vector& v) const {
    return dense_ ? Vector(Rdense_.transpose() * v) : Vector(p_.R.transpose() * v);
  }

  Vector G(const Vector& x) const {
    Vector out(L_.m);
    if (L_.ml > 0) {
      const Vector rx = Rx(x);
      for (Index k = 0; k < L_.ml; ++k) out(k) = L_.sign[k] * rx(L_.row[k]);
    }
    for (std::size_t q = 0; q < p_.soc_G.size(); ++q) out.segment(L_.q_off[q], L_.q_dim[q]) = p_.soc_G[q] * x;
    return out;
  }

  Vector Gt(const Vector& z) const {
    Vector out = Vector::Zero(p_.n);
    if (L_.ml > 0) {
      Vector agg = Vector::Zero(p_.R.rows());
      for (Index k = 0; k < L_.ml; ++k) agg(L_.row[k]) += L_.sign[k] * z(k);
      out += Rtx(agg);
    }
    for (std::size_t q = 0; q < p_.soc_G.size(); ++q)
      out += p_.soc_G[q].transpose() * z.segment(L_.q_off[q], L_.q_dim[q]);
    return out;
  }

  Vector Px(const Vector& x) const { return p_.P ? Vector(*p_.P * x) : Vector(Vector::Zero(p_.n)); }

  Vector W(const Scaling& sc, const Vector& x) const {
    Vector out(L_.m);
    out.head(L_.ml) = sc.wl.cwiseProduct(x.head(L_.ml));
    for (std::size_t q = 0; q < sc.q.size(); ++q)
      out.segment(L_.q_off[q], L_.q_dim[q]) = soc_apply_w(sc.q[q], x.segment(L_.q_off[q], L_.q_dim[q]));
    return out;
  }

  Vector Winv(const Scaling& sc, const Vector& x) const {
    Vector out(L_.m);
    out.head(L_.ml) = x.head(L_.ml).cwiseQuotient(sc.wl);
    for (std::size_t q = 0; q < sc.q.size(); ++q)
      out.segment(L_.q_off[q], L_.q_dim[q]) = soc_apply_winv(sc.q[q], x.segment(L_.q_off[q], L_.q_dim[q]));
    return out;
  }

  Vector prod(const Vector& u, const Vector& v) const {
    Vector out(L_.m);
    out.head(L_.ml) = u.head(L_.ml).cwiseProduct(v.head(L_.ml));
    for (std::size_t q = 0; q < L_.q_off.size(); ++q) {
      const Index o = L_.q_off[q], k = L_.q_dim[q];
      out(o) = u.segment(o, k).dot(v.segment(o, k));
      out.segment(o + 1, k - 1) = u(o) * v.segment(o + 1, k - 1) + v(o) * u.segment(o + 1, k - 1);
    }
    return out;
  }

  // Solves lam o x = r.
  Vector div(const Vector& lam, const Vector& r) const {
    Vector out(L_.m);
    out.head(L_.ml) = r.head(L_.ml).cwiseQuotient(lam.head(L_.ml));
    for (std::size_t q = 0; q < L_.q_off.size(); ++q) {
      const Index o = L_.q_off[q], k = L_.q_dim[q];
      const double l0 = lam(o);
      const auto l1 = lam.segment(o + 1, k - 1);
      const double det = l0 * l0 - l1.squaredNorm();
      const double x0 = (l0 * r(o) - l1.dot(r.segment(o + 1, k - 1))) / det;
      out(o) = x0;
      out.segment(o + 1, k - 1) = (r.segment(o + 1, k - 1) - x0 * l1) / l0;
    }
    return out;
  }

  Vector unit() const {
    Vector e = Vector::Zero(L_.m);
    e.head(L_.ml).setOnes();
    for (Index o : L_.q_off) e(o) = 1.0;
    return e;
  }

  // Largest alpha with u + alpha du in the cone (inf if unbounded).
  double max_step(const Vector& u, const Vector& du) const {
    double a = kInf;
    for (Index k = 0; k < L_.ml; ++k)
      if (du(k) < 0.0) a = std::min(a, -u(k) / du(k));
    for (std::size_t q = 0; q < L_.q_off.size(); ++q) {
      const Index o = L_.q_off[q], k = L_.q_dim[q];
      a = std::min(a, soc_step(u.segment(o, k), du.segment(o, k)));
    }
    return a;
  }

  // Smallest t with u + t e in the cone boundary, i.e. -lambda_min(u).
  double shift_needed(const Vector& u) const {
    double t = -kInf;
    for (Index k = 0; k < L_.ml; ++k) t = std::max(t, -u(k));
    for (std::size_t q = 0; q < L_.q_off.size(); ++q) {
      const Index o = L_.q_off[q], k = L_.q_dim[q];
      t = std::max(t, u.segment(o + 1, k - 1).norm() - u(o));
    }
    return t;
  }

  double norm_cone(const Vector& u) const { return u.norm(); }

private:
  static double soc_step(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& du) {
    const Index k = u.size();
    const double a = du(0) * du(0) - du.tail(k - 1).squaredNorm();
    const double b = 2.0 * (u(0) * du(0) - u.tail(k - 1).dot(du.tail(k - 1)));
    const double c = u(0) * u(0) - u.tail(k - 1).squaredNorm();
    if (c <= 0.0) return 0.0;
    double best = kInf;
    auto consider = [&](double t) {
      if (t > 0.0 && std::isfinite(t)) best = std::min(best, t);
    };
    if (a == 0.0) {
      if (b < 0.0) consider(-c / b);
    } else {
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (b + (b >= 0.0 ? sq : -sq));
        if (qq != 0.0) {
          consider(qq / a);
          consider(c / qq);
        }
      }
    }
    if (du(0) < 0.0) best = std::min(best, -u(0) / du(0));
    return best;
  }

  const CoreProblem& p_;
  const Layout& L_;
  Matrix Rdense_;
  bool dense_ = false;
};

// Caches P's Cholesky factor, Y = P^{-1} C' and C P^{-1} C' for C = [A; R]. False when P is not safely PD.
bool same_constraints(const CoreProblem& p, const Matrix& C) {
  const Index me = p.A.rows(), mr = p.R.rows();
  if (C.rows() != me + mr || C.cols() != p.n) return false;
  if (C.topRows(me) != p.A) return false;
  for (Index r = 0; r < mr; ++r) {
    Index prev = 0;
    for (SparseMatrix::InnerIterator it(p.R, r); it; ++it) {
      for (Index j = prev; j < it.col(); ++j)
        if (C(me + r, j) != 0.0) return false;
      if (C(me + r, it.col()) != it.value()) return false;
      prev = it.col() + 1;
    }
    for (Index j = prev; j < p.n; ++j)
      if (C(me + r, j) != 0.0) return false;
  }
  return true;
}

bool prepare_schur(const CoreProblem& p, SchurCache& sc) {
  if (sc.valid && sc.P_key == p.P && same_constraints(p, sc.C_key)) return true;
  const Index me = p.A.rows(), mr = p.R.rows();
  Matrix C(me + mr, p.n);
  C.topRows(me) = p.A;
  C.bottomRows(mr).setZero();
  for (Index r = 0; r < mr; ++r)
    for (SparseMatrix::InnerIterator it(p.R, r); it; ++it) C(me + r, it.col()) = it.value();
  if (!(sc.valid && sc.P_key == p.P)) {
    sc.valid = false;
    sc.P_llt.compute(*p.P);
    if (sc.P_llt.info() != Eigen::Success) return false;
    const double dmin = sc.P_llt.matrixLLT().diagonal().minCoeff();
    const double dmax = sc.P_llt.matrixLLT().diagonal().maxCoeff();
    if (!(dmin > 1e-7 * dmax)) return false;
  }
  sc.P_key = p.P;
  sc.C_key = std::move(C);
  sc.Y = sc.P_llt.solve(sc.C_key.transpose());
  sc.S0 = sc.C_key * sc.Y;
  sc.valid = true;
  return true;
}

class Kkt {
public:
  Kkt(const CoreProblem& p, const Layout& L, const Ops& ops, SchurCache* cache) : p_(p), L_(L), ops_(ops) {
    me_ = p.A.rows();
    mr_ = p.R.rows();
    // Split inequality rows into singletons (diagonal contributions) and the rest.
    std::vector<Index> dense_rows;
    for (Index r = 0; r < mr_; ++r) {
      if (p.R.outerIndexPtr()[r + 1] - p.R.outerIndexPtr()[r] == 1)
        singles_.push_back(r);
      else
        dense_rows.push_back(r);
    }
    dense_idx_ = dense_rows;
    Rd_ = Matrix::Zero(static_cast<Index>(dense_rows.size()), p.n);
    for (std::size_t i = 0; i < dense_rows.size(); ++i)
      for (SparseMatrix::InnerIterator it(p.R, dense_rows[i]); it; ++it) Rd_(static_cast<Index>(i), it.col()) = it.value();

    const bool schur_ok = p.soc_G.empty() && p.P && (me_ + mr_) * 2 < p.n && mr_ > 0;
    if (schur_ok) setup_schur(cache);
  }

  bool factor(const Scaling& sc) {
    sc_ = &sc;
    D_ = Vector::Zero(mr_);
    for (Index k = 0; k < L_.ml; ++k) D_(L_.row[k]) += 1.0 / (sc.wl(k) * sc.wl(k));
    return schur_ ? factor_schur() : factor_dense();
  }

  void solve(const Vector& bx, const Vector& by, const Vector& bz, Vector& dx, Vector& dy, Vector& dz) const {
    solve_once(bx, by, bz, dx, dy, dz);
    for (int pass = 0; pass < 3; ++pass) {
      const Vector rx = bx - (ops_.Px(dx) + p_.A.transpose() * dy + ops_.Gt(dz));
      const Vector ry = by - p_.A * dx;
      const Vector rz = bz - (ops_.G(dx) - ops_.W(*sc_, ops_.W(*sc_, dz)));
      const double scale = 1.0 + bx.lpNorm<Eigen::Infinity>() + (by.size() ? by.lpNorm<Eigen::Infinity>() : 0.0) +
                           (bz.size() ? bz.lpNorm<Eigen::Infinity>() : 0.0);
      const double res = std::max({rx.size() ? rx.lpNorm<Eigen::Infinity>() : 0.0,
                                   ry.size() ? ry.lpNorm<Eigen::Infinity>() : 0.0,
                                   rz.size() ? rz.lpNorm<Eigen::Infinity>() : 0.0});
      if (res <= 1e-14 * scale) break;
      Vector cx, cy, cz;
      solve_once(rx, ry, rz, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

  bool uses_schur() const { return schur_; }

private:
  void setup_schur(SchurCache* cache) {
    SchurCache local;
    SchurCache& sc = cache ? *cache : local;
    if (!prepare_schur(p_, sc)) return;
    if (cache) {
      schur_cache_ = cache;
    } else {
      owned_ = std::make_unique<SchurCache>(std::move(local));
      schur_cache_ = owned_.get();
    }
    schur_ = true;
  }

  bool factor_schur() {
    Matrix S = schur_cache_->S0;
    const double scale = std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 7; ++attempt) {
      const double delta = attempt == 0 ? 0.0 : 1e-15 * scale * std::pow(100.0, attempt);
      Matrix T = S;
      for (Index i = 0; i < me_; ++i) T(i, i) += delta;
      for (Index r = 0; r < mr_; ++r) T(me_ + r, me_ + r) += 1.0 / D_(r);
      schur_llt_.compute(T);
      if (schur_llt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  bool factor_dense() {
    const Index n = p_.n;
    Matrix H = p_.P ? Matrix(*p_.P) : Matrix(Matrix::Zero(n, n));
    if (Rd_.rows() > 0) {
      Matrix Rs = Rd_;
      for (Index i = 0; i < Rs.rows(); ++i) Rs.row(i) *= std::sqrt(D_(dense_idx_[static_cast<std::size_t>(i)]));
      H.selfadjointView<Eigen::Lower>().rankUpdate(Rs.transpose());
    }
    for (Index r : singles_) {
      SparseMatrix::InnerIterator it(p_.R, r);
      H(it.col(), it.col()) += D_(r) * it.value() * it.value();
    }
    for (std::size_t q = 0; q < p_.soc_G.size(); ++q) {
      const Matrix& Gq = p_.soc_G[q];
      Matrix M(Gq.rows(), n);
      for (Index j = 0; j < n; ++j) M.col(j) = soc_apply_winv(sc_->q[q], Gq.col(j));
      H.selfadjointView<Eigen::Lower>().rankUpdate(M.transpose());
    }
    if (me_ > 0) H.selfadjointView<Eigen::Lower>().rankUpdate(p_.A.transpose());
    const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    bool ok = false;
    for (int attempt = 0; attempt < 7 && !ok; ++attempt) {
      Matrix T = H;
      if (attempt > 0) T.diagonal().array() += 1e-15 * scale * std::pow(100.0, attempt);
      h_llt_.compute(T);
      ok = h_llt_.info() == Eigen::Success;
    }
    if (!ok) return false;
    if (me_ > 0) {
      X_ = h_llt_.solve(p_.A.transpose());
      Matrix S = p_.A * X_;
      const double s_scale = std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
      ok = false;
      for (int attempt = 0; attempt < 7 && !ok; ++attempt) {
        Matrix T = S;
        if (attempt > 0) T.diagonal().array() += 1e-15 * s_scale * std::pow(100.0, attempt);
        s_llt_.compute(T);
        ok = s_llt_.info() == Eigen::Success;
      }
    }
    return ok;
  }

  void solve_once(const Vector& bx, const Vector& by, const Vector& bz, Vector& dx, Vector& dy, Vector& dz) const {
    // e = W^{-2} bz
    const Vector e = ops_.Winv(*sc_, ops_.Winv(*sc_, bz));
    if (schur_) {
      Vector ehat = Vector::Zero(mr_);
      for (Index k = 0; k < L_.ml; ++k) ehat(L_.row[k]) += L_.sign[k] * e(k);
      const Vector pb = schur_cache_->P_llt.solve(bx);
      Vector rhs = schur_cache_->C_key * pb;
      rhs.head(me_) -= by;
      rhs.tail(mr_) -= ehat.cwiseQuotient(D_);
      const Vector nu = schur_llt_.solve(rhs);
      dx = pb - schur_cache_->Y * nu;
      dy = nu.head(me_);
    } else {
      Vector r1 = bx + ops_.Gt(e);
      if (me_ > 0) {
        r1 += p_.A.transpose() * by;
        const Vector hr = h_llt_.solve(r1);
        dy = s_llt_.solve(p_.A * hr - by);
        dx = hr - X_ * dy;
      } else {
        dx = h_llt_.solve(r1);
        dy.resize(0);
      }
    }
    dz = ops_.Winv(*sc_, ops_.Winv(*sc_, ops_.G(dx))) - e;
  }

  const CoreProblem& p_;
  const Layout& L_;
  const Ops& ops_;
  const Scaling* sc_ = nullptr;
  Index me_ = 0, mr_ = 0;
  std::vector<Index> singles_;
  std::vector<Index> dense_idx_;
  Matrix Rd_;
  Vector D_;
  bool schur_ = false;
  SchurCache* schur_cache_ = nullptr;
  std::unique_ptr<SchurCache> owned_;
  Eigen::LLT<Matrix> schur_llt_;
  Eigen::LLT<Matrix> h_llt_;
  Eigen::LLT<Matrix> s_llt_;
  Matrix X_;
};

Scaling compute_scaling(const Layout& L, const Vector& s, const Vector& z) {
  Scaling sc;
  sc.wl = (s.head(L.ml).cwiseQuotient(z.head(L.ml))).cwiseSqrt();
  for (std::size_t q = 0; q < L.q_off.size(); ++q)
    sc.q.push_back(nt_scaling(s.segment(L.q_off[q], L.q_dim[q]), z.segment(L.q_off[q], L.q_dim[q])));
  return sc;
}

Scaling identity_scaling(const Layout& L) {
  Scaling sc;
  sc.wl = Vector::Ones(L.ml);
  for (std::size_t q = 0; q < L.q_off.size(); ++q) {
    SocScaling w;
    w.v = Vector::Zero(L.q_dim[q]);
    w.v(0) = 1.0;
    sc.q.push_back(w);
  }
  return sc;
}

CoreResult solve_primal(const CoreProblem& p, const IpmOptions& opts, SchurCache* cache) {
  CoreResult res;
  const Layout L = make_layout(p);
  const Ops ops(p, L);
  Kkt kkt(p, L, ops, cache);
  const Index n = p.n;
  const double tol = opts.tol;

  const double resx0 = std::max(1.0, p.c.norm());
  const double resy0 = std::max(1.0, p.b.size() ? p.b.norm() : 0.0);
  const double resz0 = std::max(1.0, L.h.size() ? L.h.norm() : 0.0);

  Vector x(n), y(p.A.rows()), s(L.m), z(L.m);

  Scaling sc = identity_scaling(L);
  if (!kkt.factor(sc)) {
    res.status = CoreStatus::numerical_error;
    res.message = "initial KKT factorization failed";
    return res;
  }
  {
    Vector bx = -p.c;
    kkt.solve(bx, p.b, L.h, x, y, z);
  }
  if (L.m == 0) {
    const Vector rx = ops.Px(x) + p.c + p.A.transpose() * y;
    const Vector ry = p.A * x - p.b;
    res.x = x;
    res.y = y;
    res.dres = rx.norm() / resx0;
    res.pres = ry.size() ? ry.norm() / resy0 : 0.0;
    res.status = (res.dres <= tol && res.pres <= tol) ? CoreStatus::optimal : CoreStatus::dual_infeasible;
    return res;
  }
  s = -z;
  {
    const double ts = ops.shift_needed(s);
    if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * ops.unit();
    const double tz = ops.shift_needed(z);
    if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * ops.unit();
  }

  double best_merit = kInf;
  int best_it = 0;
  Vector best_x, best_y;
  const double degree = static_cast<double>(L.ml + static_cast<Index>(L.q_off.size()));
  const Vector e = ops.unit();

  for (int it = 0; it <= opts.max_iterations; ++it) {
    const Vector Px = ops.Px(x);
    const Vector rx = Px + p.c + p.A.transpose() * y + ops.Gt(z);
    const Vector ry = p.A * x - p.b;
    const Vector rz = ops.G(x) + s - L.h;
    const double gap = s.dot(z);
    const double pcost = 0.5 * x.dot(Px) + p.c.dot(x);
    const double dcost = pcost + y.dot(ry) + z.dot(rz) - gap;
    double relgap = kInf;
    if (pcost < 0.0)
      relgap = gap / -pcost;
    else if (dcost > 0.0)
      relgap = gap / dcost;
    const double pres = std::max(ry.size() ? ry.norm() / resy0 : 0.0, rz.norm() / resz0);
    const double dres = rx.norm() / resx0;
    res.iterations = it;
    res.pres = pres;
    res.dres = dres;
    res.gap = gap;
    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) {
      res.status = CoreStatus::numerical_error;
      res.message = "non-finite iterate";
      return res;
    }

    if (pres <= tol && dres <= tol && (gap <= tol || relgap <= tol)) {
      res.status = CoreStatus::optimal;
      res.x = x;
      res.y = y;
      return res;
    }
    const double merit = std::max({pres, dres, std::min(gap, relgap)});
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x;
      best_y = y;
      best_it = it;
    } else if (it - best_it >= 5 && std::min(gap, relgap) <= tol) {
      break;  // complementarity converged, residuals stalled
    }

    // Infeasibility certificates.
    const double hz = L.h.dot(z) + (p.b.size() ? p.b.dot(y) : 0.0);
    if (hz < 0.0) {
      const double pinf = (p.A.transpose() * y + ops.Gt(z)).norm() / -hz;
      if (pinf <= tol) {
        res.status = CoreStatus::primal_infeasible;
        res.message = "primal infeasibility certificate";
        return res;
      }
    }
    const double cx = p.c.dot(x);
    if (cx < 0.0) {
      const double tau = -cx;
      const Vector gs = ops.G(x) + s;
      const double dinf = std::max({Px.norm(), ry.size() ? (p.A * x).norm() : 0.0, gs.norm()}) / tau;
      if (dinf <= tol && x.norm() > 1e6) {
        res.status = CoreStatus::dual_infeasible;
        res.message = "dual infeasibility certificate";
        return res;
      }
    }
    if (it == opts.max_iterations) break;

    sc = compute_scaling(L, s, z);
    if (!kkt.factor(sc)) {
      res.status = CoreStatus::numerical_error;
      res.message = "KKT factorization failed at iteration " + std::to_string(it);
      return res;
    }
    const Vector lam = ops.W(sc, z);
    const double mu = gap / degree;

    Vector dx, dy, dz, ds;
    // Affine-scaling direction.
    {
      const Vector bz = -rz + s;
      kkt.solve(-rx, -ry, bz, dx, dy, dz);
      ds = -s - ops.W(sc, ops.W(sc, dz));
    }
    const double a_aff = std::min({1.0, ops.max_step(s, ds), ops.max_step(z, dz)});
    const Vector ds_t = ops.Winv(sc, ds);
    const Vector dz_t = ops.W(sc, dz);
    const double dsdz = ds_t.dot(dz_t);
    const double sigma = std::pow(std::clamp(1.0 - a_aff + dsdz / gap * a_aff * a_aff, 0.0, 1.0), 3.0);

    // Combined predictor-corrector direction.
    {
      const Vector rc = -ops.prod(lam, lam) - ops.prod(ds_t, dz_t) + sigma * mu * e;
      const Vector v = ops.div(lam, rc);
      const Vector Wv = ops.W(sc, v);
      const Vector bz = -rz - Wv;
      kkt.solve(-rx, -ry, bz, dx, dy, dz);
      ds = Wv - ops.W(sc, ops.W(sc, dz));
    }
    const double amax = std::min(ops.max_step(s, ds), ops.max_step(z, dz));
    const double alpha = std::min(1.0, 0.99 * amax);
    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
  }
  if (best_merit <= std::sqrt(tol)) {
    res.status = CoreStatus::optimal;
    res.x = best_x;
    res.y = best_y;
    res.message = "reduced accuracy (residual " + std::to_string(best_merit) + ")";
    return res;
  }
  res.status = CoreStatus::max_iterations;
  res.x = x;
  res.y = y;
  res.message = "iteration limit reached (pres " + std::to_string(res.pres) + ", dres " + std::to_string(res.dres) +
                ", gap " + std::to_string(res.gap) + ")";
  return res;
}

// Strongly convex QP with few constraint rows: solve the Lagrange dual over (y, mu_hi, mu_lo) and recover x.
CoreResult solve_dual(const CoreProblem& p, const IpmOptions& opts, const SchurCache& sc) {
  const Index me = p.A.rows(), mr = p.R.rows();
  std::vector<Index> row;
  std::vector<double> sign, off;
  for (Index i = 0; i < me; ++i) {
    row.push_back(i);
    sign.push_back(1.0);
    off.push_back(p.b(i));
  }
  for (Index r = 0; r < mr; ++r) {
    if (std::isfinite(p.r_hi(r))) {
      row.push_back(me + r);
      sign.push_back(1.0);
      off.push_back(p.r_hi(r));
    }
    if (std::isfinite(p.r_lo(r))) {
      row.push_back(me + r);
      sign.push_back(-1.0);
      off.push_back(-p.r_lo(r));
    }
  }
  const Index nd = static_cast<Index>(row.size());
  const Vector x0 = -sc.P_llt.solve(p.c);
  const Vector q = -(sc.C_key * x0);

  Matrix Pfull(nd, nd);
  Vector cfull(nd);
  for (Index a = 0; a < nd; ++a) {
    cfull(a) = sign[a] * q(row[a]) + off[a];
    for (Index b = 0; b <= a; ++b) {
      const double v = sign[a] * sign[b] * sc.S0(row[a], row[b]);
      Pfull(a, b) = v;
      Pfull(b, a) = v;
    }
  }
  // The free multipliers y minimize in closed form; the IPM only sees the sign-constrained ones.
  const Index nmu = nd - me;
  Eigen::LLT<Matrix> yy;
  Matrix K;  // Syy^{-1} [Sy_mu, c_y]
  if (me > 0) {
    yy.compute(Pfull.topLeftCorner(me, me));
    if (yy.info() != Eigen::Success) {
      CoreResult fail;
      fail.status = CoreStatus::numerical_error;
      fail.message = "equality multipliers are degenerate";
      return fail;
    }
    Matrix rhs(me, nmu + 1);
    rhs.leftCols(nmu) = Pfull.topRightCorner(me, nmu);
    rhs.col(nmu) = cfull.head(me);
    K = yy.solve(rhs);
  }
  auto Pd = std::make_shared<Matrix>(Pfull.bottomRightCorner(nmu, nmu));
  CoreProblem d;
  d.n = nmu;
  d.c = cfull.tail(nmu);
  if (me > 0) {
    *Pd -= Pfull.bottomLeftCorner(nmu, me) * K.leftCols(nmu);
    *Pd = (0.5 * (*Pd + Pd->transpose())).eval();
    d.c -= Pfull.bottomLeftCorner(nmu, me) * K.col(nmu);
  }
  d.P = Pd;
  d.A.resize(0, nmu);
  d.b.resize(0);
  std::vector<Eigen::Triplet<double>> trip;
  for (Index k = 0; k < nmu; ++k) trip.emplace_back(k, k, 1.0);
  d.R.resize(nmu, nmu);
  d.R.setFromTriplets(trip.begin(), trip.end());
  d.R.makeCompressed();
  d.r_lo = Vector::Zero(nmu);
  d.r_hi = Vector::Constant(nmu, kInf);

  CoreResult dr;
  if (nmu == 0) {
    dr.status = CoreStatus::optimal;
    dr.x = Vector(0);
  } else {
    dr = solve_primal(d, opts, nullptr);
  }
  CoreResult res;
  res.iterations = dr.iterations;
  res.message = dr.message;
  switch (dr.status) {
    case CoreStatus::optimal: {
      Vector w(nd);
      w.tail(nmu) = dr.x;
      if (me > 0) w.head(me) = -(K.col(nmu) + K.leftCols(nmu) * dr.x);
      Vector nu = Vector::Zero(me + mr);
      for (Index a = 0; a < nd; ++a) nu(row[a]) += sign[a] * w(a);
      res.status = CoreStatus::optimal;
      res.x = x0 - sc.Y * nu;
      res.y = nu.head(me);
      res.pres = dr.dres;
      res.dres = dr.pres;
      res.gap = dr.gap;
      break;
    }
    case CoreStatus::dual_infeasible:
      res.status = CoreStatus::primal_infeasible;
      break;
    case CoreStatus::primal_infeasible:
      res.status = CoreStatus::dual_infeasible;
      break;
    default:
      res.status = dr.status;
  }
  return res;
}

}  // namespace

CoreResult solve_core(const CoreProblem& p, const IpmOptions& opts, SchurCache* cache) {
  const Index rows = p.A.rows() + p.R.rows();
  if (cache && p.soc_G.empty() && p.P && rows > 0 && 2 * rows < p.n && prepare_schur(p, *cache))
    return solve_dual(p, opts, *cache);
  return solve_primal(p, opts, cache);
}

}  // namespace rdeep::detail
