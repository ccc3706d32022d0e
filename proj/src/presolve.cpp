#include "presolve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace rdeep::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using Entry = std::pair<Index, double>;

double feas_tol(double a, double b) {
  double s = 1.0;
  if (std::isfinite(a)) s = std::max(s, std::abs(a));
  if (std::isfinite(b)) s = std::max(s, std::abs(b));
  return 1e-9 * s;
}

struct WRow {
  std::vector<Entry> e;  // sorted by column
  double lo = -kInf;
  double hi = kInf;
  bool eq = false;
  bool alive = true;
};

std::vector<Entry> sparse_row(const SparseMatrix& M, Index r) {
  std::vector<Entry> out;
  for (SparseMatrix::InnerIterator it(M, r); it; ++it)
    if (it.value() != 0.0) out.emplace_back(it.col(), it.value());
  return out;
}

bool col_nonzero(const SparseMatrix& M, Index j) {
  for (Index r = 0; r < M.outerSize(); ++r)
    if (M.coeff(r, j) != 0.0) return true;
  return false;
}

std::vector<char> column_support(const SparseMatrix& M) {
  std::vector<char> s(static_cast<std::size_t>(M.cols()), 0);
  for (Index r = 0; r < M.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(M, r); it; ++it)
      if (it.value() != 0.0) s[static_cast<std::size_t>(it.col())] = 1;
  return s;
}

// B' v, skipping rows where v vanishes.
Vector transpose_times(const SparseMatrix& B, const Vector& v) {
  Vector out = Vector::Zero(B.cols());
  for (Index r = 0; r < B.rows(); ++r) {
    if (v(r) == 0.0) continue;
    for (SparseMatrix::InnerIterator it(B, r); it; ++it) out(it.col()) += v(r) * it.value();
  }
  return out;
}

std::shared_ptr<const Matrix> gram_of(const SparseMatrix& B, double scale) {
  const Index n = B.cols();
  Matrix P = Matrix::Zero(n, n);
  std::vector<Index> dense_rows;
  for (Index r = 0; r < B.rows(); ++r) {
    const Index nnz = B.outerIndexPtr()[r + 1] - B.outerIndexPtr()[r];
    if (nnz == 1) {
      SparseMatrix::InnerIterator it(B, r);
      P(it.col(), it.col()) += scale * it.value() * it.value();
    } else if (nnz > 1) {
      dense_rows.push_back(r);
    }
  }
  if (!dense_rows.empty()) {
    Matrix D = Matrix::Zero(static_cast<Index>(dense_rows.size()), n);
    for (std::size_t i = 0; i < dense_rows.size(); ++i)
      for (SparseMatrix::InnerIterator it(B, dense_rows[i]); it; ++it) D(static_cast<Index>(i), it.col()) = it.value();
    P.selfadjointView<Eigen::Lower>().rankUpdate(D.transpose(), scale);
  }
  P.triangularView<Eigen::StrictlyUpper>() = P.transpose();
  return std::make_shared<const Matrix>(std::move(P));
}

bool is_rotated(const SocBlock& b) {
  if (!b.tail) return false;
  const double scale = std::max({1.0, std::abs(b.tail_offset), std::abs(b.cone_d)});
  if (std::abs(b.tail_offset + b.cone_d - 2.0) > 4 * std::numeric_limits<double>::epsilon() * scale) return false;
  return (*b.tail + b.cone_c).cwiseAbs().maxCoeff() == 0.0;
}

class Reducer {
public:
  Reducer(const ConicProgram& prog, PresolveCache& cache, Presolved& out)
      : prog_(prog), cache_(cache), out_(out), n_(prog.num_vars) {
    cost_ = prog.objective;
    lb_ = Vector::Constant(n_, -kInf);
    ub_ = Vector::Constant(n_, kInf);
    alive_.assign(static_cast<std::size_t>(n_), 1);
    quad_.assign(static_cast<std::size_t>(n_), 0);
    locked_.assign(static_cast<std::size_t>(n_), 0);
    col_rows_.resize(static_cast<std::size_t>(n_));
    out_.fixed.assign(static_cast<std::size_t>(n_), std::numeric_limits<double>::quiet_NaN());
  }

  void run() {
    lift_epigraph();
    for (std::size_t q = 0; q < prog_.soc_blocks.size(); ++q) {
      if (lifted_block(q)) continue;
      const SocBlock& b = prog_.soc_blocks[q];
      const auto sup = column_support(*b.body);
      for (Index j = 0; j < n_; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        if (sup[u] || b.cone_c(j) != 0.0 || (b.tail && (*b.tail)(j) != 0.0)) locked_[u] = 1;
      }
    }
    {
      std::vector<std::size_t> count(static_cast<std::size_t>(n_), 0);
      for (const SparseMatrix* M : {prog_.eq_matrix.get(), prog_.ineq_matrix.get()})
        if (M)
          for (Index k = 0; k < M->nonZeros(); ++k) ++count[static_cast<std::size_t>(M->innerIndexPtr()[k])];
      for (Index j = 0; j < n_; ++j) col_rows_[static_cast<std::size_t>(j)].reserve(count[static_cast<std::size_t>(j)] + 2);
    }
    if (prog_.eq_matrix)
      for (Index r = 0; r < prog_.eq_matrix->rows(); ++r)
        add_row(sparse_row(*prog_.eq_matrix, r), prog_.eq_rhs(r), prog_.eq_rhs(r), true);
    if (prog_.ineq_matrix)
      for (Index r = 0; r < prog_.ineq_matrix->rows(); ++r)
        add_row(sparse_row(*prog_.ineq_matrix, r), prog_.ineq_lower(r), prog_.ineq_upper(r), false);
    for (auto& [e, hi] : cuts_) add_row(std::move(e), -kInf, hi, false);

    for (int pass = 0; pass < 50 && ok(); ++pass) {
      bool changed = false;
      for (std::size_t r = 0; r < rows_.size() && ok(); ++r)
        if (rows_[r].alive) changed |= reduce_row(r);
      for (Index j = 0; j < n_ && ok(); ++j)
        if (alive_[static_cast<std::size_t>(j)]) changed |= reduce_col(j);
      if (!changed) break;
    }
    if (ok()) merge_parallel();
    if (ok()) build_core();
  }

private:
  bool ok() const { return out_.status == Presolved::Status::reduced; }
  void fail(Presolved::Status s, std::string msg) {
    if (!ok()) return;
    out_.status = s;
    out_.message = std::move(msg);
  }
  bool lifted_block(std::size_t q) const {
    return std::find(out_.lifted.blocks.begin(), out_.lifted.blocks.end(), q) != out_.lifted.blocks.end();
  }

  void lift_epigraph() {
    Index t = -1;
    for (Index j = 0; j < n_; ++j) {
      if (cost_(j) == 0.0) continue;
      if (t >= 0) return;
      t = j;
    }
    if (t < 0 || cost_(t) <= 0.0) return;
    const double w = cost_(t);
    if (prog_.eq_matrix && col_nonzero(*prog_.eq_matrix, t)) return;
    if (prog_.ineq_matrix && col_nonzero(*prog_.ineq_matrix, t)) return;

    std::vector<std::size_t> group;
    const SparseMatrix* body = nullptr;
    const SparseMatrix* seen = nullptr;
    bool body_has_t = false;
    for (std::size_t q = 0; q < prog_.soc_blocks.size(); ++q) {
      const SocBlock& b = prog_.soc_blocks[q];
      if (b.body.get() != seen) {
        seen = b.body.get();
        if (cache_.support_key != seen || cache_.support.size() != static_cast<std::size_t>(n_)) {
          cache_.support = column_support(*seen);
          cache_.support_key = seen;
          cache_.support_hold = b.body;
        }
        body_has_t = cache_.support[static_cast<std::size_t>(t)] != 0;
      }
      const bool touches = b.cone_c(t) != 0.0 || (b.tail && (*b.tail)(t) != 0.0) || body_has_t;
      if (!touches) continue;
      if (!is_rotated(b) || b.cone_c(t) != 1.0 || body_has_t) return;
      if (body && body != b.body.get()) return;
      body = b.body.get();
      group.push_back(q);
    }
    if (group.empty()) return;

    const SocBlock& first = prog_.soc_blocks[group.front()];
    if (!(cache_.body_key == body && cache_.weight_key == w && cache_.P_full)) {
      cache_.body_key = body;
      cache_.body_hold = first.body;
      cache_.weight_key = w;
      cache_.P_full = gram_of(*body, 0.5 * w);
      cache_.core_src_key = nullptr;
    }
    if (cache_.support_key != body) {
      cache_.support = column_support(*body);
      cache_.support_key = body;
      cache_.support_hold = first.body;
    }
    P_ = cache_.P_full;
    for (Index j = 0; j < n_; ++j) quad_[static_cast<std::size_t>(j)] = cache_.support[static_cast<std::size_t>(j)];

    out_.lifted.t_index = t;
    out_.lifted.blocks = group;
    if (group.size() == 1) {
      const SocBlock& b = first;
      Vector g = 0.5 * transpose_times(*body, b.body_offset) - b.cone_c;
      g(t) = 0.0;
      cost_ = w * g;
      return;
    }
    Matrix offsets(body->rows(), static_cast<Index>(group.size()));
    for (std::size_t i = 0; i < group.size(); ++i) offsets.col(static_cast<Index>(i)) = prog_.soc_blocks[group[i]].body_offset;
    const Matrix BtO = body->transpose() * offsets;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const std::size_t q = group[i];
      const SocBlock& b = prog_.soc_blocks[q];
      Vector g = 0.5 * BtO.col(static_cast<Index>(i)) - b.cone_c;
      g(t) = -1.0;
      const double kappa = 0.25 * b.body_offset.squaredNorm() - b.cone_d + 1.0;
      std::vector<Entry> e;
      for (Index j = 0; j < n_; ++j)
        if (g(j) != 0.0) e.emplace_back(j, g(j));
      cuts_.emplace_back(std::move(e), -kappa);
    }
  }

  void add_row(std::vector<Entry> e, double lo, double hi, bool eq) {
    const std::size_t id = rows_.size();
    for (const Entry& x : e) col_rows_[static_cast<std::size_t>(x.first)].push_back(id);
    rows_.push_back({std::move(e), lo, hi, eq, true});
  }

  static double coef(const WRow& r, Index j) {
    const auto it = std::lower_bound(r.e.begin(), r.e.end(), j, [](const Entry& a, Index b) { return a.first < b; });
    return (it != r.e.end() && it->first == j) ? it->second : 0.0;
  }

  void kill_row(std::size_t r) {
    rows_[r].alive = false;
    ++out_.rows_removed;
  }

  bool reduce_row(std::size_t r) {
    WRow& row = rows_[r];
    const double tol = feas_tol(row.lo, row.hi);
    if (row.lo > row.hi + tol) {
      fail(Presolved::Status::infeasible, "row bounds conflict");
      return false;
    }
    if (row.e.empty()) {
      if (row.lo > tol || row.hi < -tol) fail(Presolved::Status::infeasible, "empty row with nonzero requirement");
      kill_row(r);
      return true;
    }
    if (row.e.size() == 1) {
      const auto [j, a] = row.e.front();
      if (!row.eq) {
        tighten(j, a, row.lo, row.hi);
        kill_row(r);
        return true;
      }
      if (locked_[static_cast<std::size_t>(j)]) return false;
      const double v = row.hi / a;
      if (v < lb_(j) - feas_tol(lb_(j), v) || v > ub_(j) + feas_tol(ub_(j), v)) {
        fail(Presolved::Status::infeasible, "fixed value outside bounds");
        return false;
      }
      kill_row(r);
      fix(j, v);
      return true;
    }
    if (row.eq && row.e.size() == 2) return substitute(r);
    return false;
  }

  void tighten(Index j, double a, double lo, double hi) {
    double l = lo / a, u = hi / a;
    if (a < 0.0) std::swap(l, u);
    lb_(j) = std::max(lb_(j), l);
    ub_(j) = std::min(ub_(j), u);
  }

  void fix(Index j, double v) {
    const std::size_t u = static_cast<std::size_t>(j);
    alive_[u] = 0;
    out_.fixed[u] = v;
    ++out_.cols_removed;
    for (std::size_t r : col_rows_[u]) {
      WRow& row = rows_[r];
      if (!row.alive) continue;
      const auto it =
          std::lower_bound(row.e.begin(), row.e.end(), j, [](const Entry& x, Index b) { return x.first < b; });
      if (it == row.e.end() || it->first != j) continue;
      const double a = it->second;
      row.e.erase(it);
      row.lo -= a * v;
      row.hi -= a * v;
    }
    if (quad_[u] && P_) cost_ += P_->col(j) * v;
  }

  bool substitute(std::size_t r) {
    WRow& row = rows_[r];
    const auto [i0, a0] = row.e[0];
    const auto [i1, a1] = row.e[1];
    const double amax = std::max(std::abs(a0), std::abs(a1));
    Index e = -1, k = -1;
    double ae = 0.0, ak = 0.0;
    auto eligible = [&](Index j, double a) {
      const std::size_t u = static_cast<std::size_t>(j);
      return !quad_[u] && !locked_[u] && std::abs(a) >= 1e-3 * amax;
    };
    if (eligible(i1, a1)) {
      e = i1, ae = a1, k = i0, ak = a0;
    } else if (eligible(i0, a0)) {
      e = i0, ae = a0, k = i1, ak = a1;
    } else {
      return false;
    }
    const double rhs = row.hi;
    // x_e = (rhs - ak x_k) / ae; carry x_e's bounds over to x_k.
    {
      double lo = -kInf, hi = kInf;  // interval for ak x_k
      const double l = lb_(e), u = ub_(e);
      if (ae > 0.0) {
        if (std::isfinite(u)) lo = rhs - ae * u;
        if (std::isfinite(l)) hi = rhs - ae * l;
      } else {
        if (std::isfinite(l)) lo = rhs - ae * l;
        if (std::isfinite(u)) hi = rhs - ae * u;
      }
      tighten(k, ak, lo, hi);
    }
    out_.subs.push_back({e, rhs, ae, {{k, ak}}});
    kill_row(r);
    const std::size_t ue = static_cast<std::size_t>(e);
    alive_[ue] = 0;
    ++out_.cols_removed;
    cost_(k) -= cost_(e) * ak / ae;
    cost_(e) = 0.0;
    for (std::size_t q : col_rows_[ue]) {
      WRow& other = rows_[q];
      if (!other.alive) continue;
      const double b = coef(other, e);
      if (b == 0.0) continue;
      other.lo -= b * rhs / ae;
      other.hi -= b * rhs / ae;
      std::vector<Entry> merged;
      merged.reserve(other.e.size());
      bool placed = false;
      const double add = -b * ak / ae;
      for (const Entry& x : other.e) {
        if (x.first == e) continue;
        if (!placed && x.first >= k) {
          if (x.first == k) {
            const double v = x.second + add;
            if (v != 0.0) merged.emplace_back(k, v);
            placed = true;
            continue;
          }
          merged.emplace_back(k, add);
          placed = true;
        }
        merged.push_back(x);
      }
      if (!placed) merged.emplace_back(k, add);
      other.e = std::move(merged);
      col_rows_[static_cast<std::size_t>(k)].push_back(q);
    }
    return true;
  }

  bool reduce_col(Index j) {
    const std::size_t u = static_cast<std::size_t>(j);
    const double tol = feas_tol(lb_(j), ub_(j));
    if (lb_(j) > ub_(j) + tol) {
      fail(Presolved::Status::infeasible, "variable bounds conflict");
      return false;
    }
    if (locked_[u]) return false;
    if (lb_(j) > ub_(j) - tol) {
      fix(j, 0.5 * (lb_(j) + ub_(j)));
      return true;
    }
    if (quad_[u]) return false;
    bool dec_free = true, inc_free = true;
    for (std::size_t r : col_rows_[u]) {
      const WRow& row = rows_[r];
      if (!row.alive) continue;
      const double a = coef(row, j);
      if (a == 0.0) continue;
      if (row.eq) return false;
      const bool lo_fin = std::isfinite(row.lo), hi_fin = std::isfinite(row.hi);
      if (a > 0.0) {
        dec_free &= !lo_fin;
        inc_free &= !hi_fin;
      } else {
        dec_free &= !hi_fin;
        inc_free &= !lo_fin;
      }
    }
    const double c = cost_(j);
    if (c > 0.0 && dec_free) return fix_at(j, lb_(j));
    if (c < 0.0 && inc_free) return fix_at(j, ub_(j));
    if (c == 0.0) {
      if (dec_free && std::isfinite(lb_(j))) return fix_at(j, lb_(j));
      if (inc_free && std::isfinite(ub_(j))) return fix_at(j, ub_(j));
      if (dec_free && inc_free) return fix_at(j, std::clamp(0.0, lb_(j), ub_(j)));
    }
    return false;
  }

  bool fix_at(Index j, double v) {
    if (!std::isfinite(v)) {
      fail(Presolved::Status::unbounded, "objective decreases without bound along a free column");
      return false;
    }
    fix(j, v);
    return true;
  }

  void merge_parallel() {
    std::unordered_map<std::size_t, std::vector<std::size_t>> buckets;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      const WRow& row = rows_[r];
      if (!row.alive || row.eq || row.e.empty()) continue;
      const double a0 = row.e.front().second;
      std::size_t h = row.e.size();
      for (const Entry& x : row.e) {
        const double v = x.second / a0;
        h ^= std::hash<std::uint64_t>{}(std::bit_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(x.first + 1)) +
             0x9e3779b9 + (h << 6) + (h >> 2);
      }
      auto& bucket = buckets[h];
      bool merged = false;
      for (std::size_t r1 : bucket) {
        WRow& base = rows_[r1];
        if (base.e.size() != row.e.size()) continue;
        const double b0 = base.e.front().second;
        bool same = true;
        for (std::size_t i = 0; i < row.e.size() && same; ++i)
          same = base.e[i].first == row.e[i].first && base.e[i].second / b0 == row.e[i].second / a0;
        if (!same) continue;
        const double rho = a0 / b0;  // row = rho * base
        double lo = row.lo / rho, hi = row.hi / rho;
        if (rho < 0.0) std::swap(lo, hi);
        base.lo = std::max(base.lo, lo);
        base.hi = std::min(base.hi, hi);
        if (base.lo > base.hi + feas_tol(base.lo, base.hi)) {
          fail(Presolved::Status::infeasible, "parallel rows with disjoint ranges");
          return;
        }
        kill_row(r);
        merged = true;
        break;
      }
      if (!merged) bucket.push_back(r);
    }
  }

  void build_core() {
    CoreProblem& core = out_.core;
    std::vector<Index> map(static_cast<std::size_t>(n_), -1);
    for (Index j = 0; j < n_; ++j)
      if (alive_[static_cast<std::size_t>(j)]) {
        map[static_cast<std::size_t>(j)] = static_cast<Index>(out_.core_to_orig.size());
        out_.core_to_orig.push_back(j);
      }
    const Index nc = static_cast<Index>(out_.core_to_orig.size());
    core.n = nc;
    core.c.resize(nc);
    for (Index i = 0; i < nc; ++i) core.c(i) = cost_(out_.core_to_orig[static_cast<std::size_t>(i)]);

    if (P_) {
      bool any = false;
      for (Index j : out_.core_to_orig) any |= quad_[static_cast<std::size_t>(j)] != 0;
      if (any) {
        if (!(cache_.core_src_key == P_.get() && cache_.core_keep_key == out_.core_to_orig && cache_.P_core)) {
          auto Pc = std::make_shared<Matrix>(nc, nc);
          for (Index b = 0; b < nc; ++b)
            for (Index a = 0; a < nc; ++a)
              (*Pc)(a, b) = (*P_)(out_.core_to_orig[static_cast<std::size_t>(a)], out_.core_to_orig[static_cast<std::size_t>(b)]);
          cache_.core_src_key = P_.get();
          cache_.core_keep_key = out_.core_to_orig;
          cache_.P_core = std::move(Pc);
        }
        core.P = cache_.P_core;
      }
    }

    std::vector<std::size_t> eqs, ineqs;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      const WRow& row = rows_[r];
      if (!row.alive) continue;
      if (row.eq)
        eqs.push_back(r);
      else if (std::isfinite(row.lo) || std::isfinite(row.hi))
        ineqs.push_back(r);
    }
    core.A = Matrix::Zero(static_cast<Index>(eqs.size()), nc);
    core.b.resize(static_cast<Index>(eqs.size()));
    for (std::size_t i = 0; i < eqs.size(); ++i) {
      const WRow& row = rows_[eqs[i]];
      for (const Entry& x : row.e) core.A(static_cast<Index>(i), map[static_cast<std::size_t>(x.first)]) = x.second;
      core.b(static_cast<Index>(i)) = row.hi;
    }
    std::vector<Index> bounded;
    for (Index i = 0; i < nc; ++i) {
      const Index j = out_.core_to_orig[static_cast<std::size_t>(i)];
      if (std::isfinite(lb_(j)) || std::isfinite(ub_(j))) bounded.push_back(i);
    }
    const Index rr = static_cast<Index>(ineqs.size() + bounded.size());
    std::size_t nnz = bounded.size();
    for (std::size_t r : ineqs) nnz += rows_[r].e.size();
    std::vector<double> lo, hi;
    lo.reserve(static_cast<std::size_t>(rr));
    hi.reserve(static_cast<std::size_t>(rr));
    // Column map is monotone and row entries are sorted, so rows can be appended in order.
    core.R.resize(rr, nc);
    core.R.reserve(static_cast<Index>(nnz));
    Index k = 0;
    for (std::size_t r : ineqs) {
      const WRow& row = rows_[r];
      core.R.startVec(k);
      for (const Entry& x : row.e) core.R.insertBack(k, map[static_cast<std::size_t>(x.first)]) = x.second;
      lo.push_back(row.lo);
      hi.push_back(row.hi);
      ++k;
    }
    for (Index i : bounded) {
      const Index j = out_.core_to_orig[static_cast<std::size_t>(i)];
      core.R.startVec(k);
      core.R.insertBack(k, i) = 1.0;
      lo.push_back(lb_(j));
      hi.push_back(ub_(j));
      ++k;
    }
    core.R.finalize();
    core.r_lo = Eigen::Map<Vector>(lo.data(), rr);
    core.r_hi = Eigen::Map<Vector>(hi.data(), rr);

    for (std::size_t q = 0; q < prog_.soc_blocks.size(); ++q) {
      if (lifted_block(q)) continue;
      const SocBlock& b = prog_.soc_blocks[q];
      const Matrix Bd = b.dense_matrix();
      Matrix G(Bd.rows() + 1, nc);
      for (Index i = 0; i < nc; ++i) {
        const Index j = out_.core_to_orig[static_cast<std::size_t>(i)];
        G(0, i) = -b.cone_c(j);
        G.block(1, i, Bd.rows(), 1) = -Bd.col(j);
      }
      Vector h(Bd.rows() + 1);
      h(0) = b.cone_d;
      h.tail(Bd.rows()) = b.offset();
      core.soc_G.push_back(std::move(G));
      core.soc_h.push_back(std::move(h));
    }
  }

  const ConicProgram& prog_;
  PresolveCache& cache_;
  Presolved& out_;
  Index n_;
  Vector cost_, lb_, ub_;
  std::vector<char> alive_, quad_, locked_;
  std::vector<WRow> rows_;
  std::vector<std::vector<std::size_t>> col_rows_;
  std::vector<std::pair<std::vector<Entry>, double>> cuts_;
  std::shared_ptr<const Matrix> P_;
};

}  // namespace

Presolved presolve(const ConicProgram& prog, PresolveCache& cache) {
  Presolved out;
  Reducer(prog, cache, out).run();
  return out;
}

Vector postsolve(const ConicProgram& prog, const Presolved& pre, const Vector& core_x) {
  const Index n = prog.num_vars;
  Vector x = Vector::Zero(n);
  for (Index j = 0; j < n; ++j)
    if (!std::isnan(pre.fixed[static_cast<std::size_t>(j)])) x(j) = pre.fixed[static_cast<std::size_t>(j)];
  for (std::size_t i = 0; i < pre.core_to_orig.size(); ++i) x(pre.core_to_orig[i]) = core_x(static_cast<Index>(i));
  for (auto it = pre.subs.rbegin(); it != pre.subs.rend(); ++it) {
    double v = it->rhs;
    for (const auto& [k, a] : it->others) v -= a * x(k);
    x(it->var) = v / it->coef;
  }
  if (pre.lifted.t_index >= 0) {
    const Index t = pre.lifted.t_index;
    x(t) = 0.0;
    double best = -kInf;
    const Vector Bx = *prog.soc_blocks[pre.lifted.blocks.front()].body * x;
    for (std::size_t q : pre.lifted.blocks) {
      const SocBlock& b = prog.soc_blocks[q];
      const Vector u = Bx + b.body_offset;
      const double need = 0.25 * u.squaredNorm() - (b.cone_c.dot(x) + b.cone_d - 1.0);
      best = std::max(best, need);
    }
    x(t) = best;
  }
  return x;
}

CoreProblem to_core(const ConicProgram& prog) {
  CoreProblem core;
  const Index n = prog.num_vars;
  core.n = n;
  core.c = prog.objective;
  core.A = prog.eq_matrix ? Matrix(*prog.eq_matrix) : Matrix(0, n);
  core.b = prog.eq_matrix ? prog.eq_rhs : Vector(0);
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> lo, hi;
  Index rr = 0;
  if (prog.ineq_matrix) {
    for (Index r = 0; r < prog.ineq_matrix->rows(); ++r) {
      if (!std::isfinite(prog.ineq_lower(r)) && !std::isfinite(prog.ineq_upper(r))) continue;
      for (SparseMatrix::InnerIterator it(*prog.ineq_matrix, r); it; ++it) trip.emplace_back(rr, it.col(), it.value());
      lo.push_back(prog.ineq_lower(r));
      hi.push_back(prog.ineq_upper(r));
      ++rr;
    }
  }
  core.R.resize(rr, n);
  core.R.setFromTriplets(trip.begin(), trip.end());
  core.r_lo = Eigen::Map<Vector>(lo.data(), rr);
  core.r_hi = Eigen::Map<Vector>(hi.data(), rr);
  for (const SocBlock& b : prog.soc_blocks) {
    const Matrix Bd = b.dense_matrix();
    Matrix G(Bd.rows() + 1, n);
    G.row(0) = -b.cone_c.transpose();
    G.bottomRows(Bd.rows()) = -Bd;
    Vector h(Bd.rows() + 1);
    h(0) = b.cone_d;
    h.tail(Bd.rows()) = b.offset();
    core.soc_G.push_back(std::move(G));
    core.soc_h.push_back(std::move(h));
  }
  return core;
}

}  // namespace rdeep::detail
