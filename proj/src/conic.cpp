#include "rdeep/conic.hpp"

#include "ipm.hpp"
#include "presolve.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace rdeep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Matrix SocBlock::dense_matrix() const {
  Matrix M(norm_rows(), body->cols());
  M.topRows(body->rows()) = Matrix(*body);
  if (tail) M.row(body->rows()) = tail->transpose();
  return M;
}

Vector SocBlock::offset() const {
  Vector o(norm_rows());
  o.head(body->rows()) = body_offset;
  if (tail) o(body->rows()) = tail_offset;
  return o;
}

Index ConicProgram::num_constraint_rows() const {
  Index k = num_eq() + static_cast<Index>(soc_blocks.size());
  for (Index r = 0; r < num_ineq(); ++r) {
    if (std::isfinite(ineq_lower(r))) ++k;
    if (std::isfinite(ineq_upper(r))) ++k;
  }
  return k;
}

void ConicProgram::validate() const {
  require_dims(num_vars >= 1, "ConicProgram: no variables");
  require_dims(objective.size() == num_vars, "ConicProgram: objective length");
  if (eq_matrix) {
    require_dims(eq_matrix->cols() == num_vars, "ConicProgram: eq matrix width");
    require_dims(eq_rhs.size() == eq_matrix->rows(), "ConicProgram: eq rhs length");
  }
  if (ineq_matrix) {
    require_dims(ineq_matrix->cols() == num_vars, "ConicProgram: ineq matrix width");
    require_dims(ineq_lower.size() == ineq_matrix->rows() && ineq_upper.size() == ineq_matrix->rows(),
                 "ConicProgram: ineq bound length");
  }
  for (const SocBlock& b : soc_blocks) {
    require_dims(b.body != nullptr, "SocBlock: missing body");
    require_dims(b.body->cols() == num_vars, "SocBlock: body width");
    require_dims(b.body_offset.size() == b.body->rows(), "SocBlock: offset length");
    require_dims(!b.tail || b.tail->size() == num_vars, "SocBlock: tail length");
    require_dims(b.cone_c.size() == num_vars, "SocBlock: cone vector length");
    require_dims(b.norm_rows() >= 2, "SocBlock: norm part needs at least 2 rows");
  }
}

// ---------------------------------------------------------------------------

ProgramBuilder::ProgramBuilder(Index num_vars) : n_(num_vars), c_(Vector::Zero(num_vars)) {
  require_dims(num_vars >= 1, "ProgramBuilder: no variables");
}

void ProgramBuilder::set_objective(Vector c) {
  require_dims(c.size() == n_, "ProgramBuilder: objective length");
  c_ = std::move(c);
}

void ProgramBuilder::set_objective_entry(Index i, double v) {
  require_dims(i >= 0 && i < n_, "ProgramBuilder: objective index");
  c_(i) = v;
}

void ProgramBuilder::add_eq_row(const std::vector<std::pair<Index, double>>& entries, double rhs) {
  const int r = static_cast<int>(eq_rhs_.size());
  for (const auto& [j, v] : entries) {
    require_dims(j >= 0 && j < n_, "ProgramBuilder: column out of range");
    eq_.emplace_back(r, j, v);
  }
  eq_rhs_.push_back(rhs);
}

void ProgramBuilder::add_ineq_row(const std::vector<std::pair<Index, double>>& entries, double lower, double upper) {
  const int r = static_cast<int>(lo_.size());
  for (const auto& [j, v] : entries) {
    require_dims(j >= 0 && j < n_, "ProgramBuilder: column out of range");
    ineq_.emplace_back(r, j, v);
  }
  lo_.push_back(lower);
  hi_.push_back(upper);
}

void ProgramBuilder::add_eq_rows(const Matrix& rows, Index col, const Vector& rhs) {
  require_dims(col >= 0 && col + rows.cols() <= n_, "ProgramBuilder: block exceeds width");
  require_dims(rhs.size() == rows.rows(), "ProgramBuilder: rhs length");
  const Index r0 = static_cast<Index>(eq_rhs_.size());
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j)
      if (rows(i, j) != 0.0) eq_.emplace_back(r0 + i, col + j, rows(i, j));
    eq_rhs_.push_back(rhs(i));
  }
}

void ProgramBuilder::add_ineq_rows(const Matrix& rows, Index col, const Vector& lower, const Vector& upper) {
  require_dims(col >= 0 && col + rows.cols() <= n_, "ProgramBuilder: block exceeds width");
  require_dims(lower.size() == rows.rows() && upper.size() == rows.rows(), "ProgramBuilder: bound length");
  const Index r0 = static_cast<Index>(lo_.size());
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j)
      if (rows(i, j) != 0.0) ineq_.emplace_back(r0 + i, col + j, rows(i, j));
    lo_.push_back(lower(i));
    hi_.push_back(upper(i));
  }
}

void ProgramBuilder::add_soc(SocBlock block) { socs_.push_back(std::move(block)); }

ConicProgram ProgramBuilder::finish() {
  ConicProgram p;
  p.num_vars = n_;
  p.objective = c_;
  if (!eq_rhs_.empty()) {
    auto A = std::make_shared<SparseMatrix>(static_cast<Index>(eq_rhs_.size()), n_);
    A->setFromTriplets(eq_.begin(), eq_.end());
    p.eq_matrix = std::move(A);
    p.eq_rhs = Eigen::Map<const Vector>(eq_rhs_.data(), static_cast<Index>(eq_rhs_.size()));
  }
  if (!lo_.empty()) {
    auto G = std::make_shared<SparseMatrix>(static_cast<Index>(lo_.size()), n_);
    G->setFromTriplets(ineq_.begin(), ineq_.end());
    p.ineq_matrix = std::move(G);
    p.ineq_lower = Eigen::Map<const Vector>(lo_.data(), static_cast<Index>(lo_.size()));
    p.ineq_upper = Eigen::Map<const Vector>(hi_.data(), static_cast<Index>(hi_.size()));
  }
  p.soc_blocks = std::move(socs_);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const SparseMatrix> epigraph_body(const Matrix& F, Index num_vars, Index col) {
  require_dims(F.size() > 0, "epigraph_body: empty factor");
  require_dims(col >= 0 && col + F.cols() <= num_vars, "epigraph_body: factor exceeds width");
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < F.rows(); ++i)
    for (Index j = 0; j < F.cols(); ++j)
      if (F(i, j) != 0.0) t.emplace_back(i, col + j, 2.0 * F(i, j));
  auto B = std::make_shared<SparseMatrix>(F.rows(), num_vars);
  B->setFromTriplets(t.begin(), t.end());
  return B;
}

SocBlock quadratic_epigraph_block(std::shared_ptr<const SparseMatrix> body_2F, const Vector& f2, const Vector& d,
                                  double c, Index t_index) {
  require_dims(body_2F && body_2F->rows() > 0, "quadratic_epigraph_block: empty factor");
  const Index n = body_2F->cols();
  require_dims(d.size() == n, "quadratic_epigraph_block: linear term length");
  require_dims(t_index >= 0 && t_index < n, "quadratic_epigraph_block: t index out of range");
  SocBlock b;
  b.body_offset = f2.size() ? f2 : Vector(Vector::Zero(body_2F->rows()));
  require_dims(b.body_offset.size() == body_2F->rows(), "quadratic_epigraph_block: offset length");
  b.body = std::move(body_2F);
  Vector tail = d;
  tail(t_index) -= 1.0;
  b.tail = tail;
  b.tail_offset = 1.0 + c;
  b.cone_c = -tail;
  b.cone_d = 1.0 - c;
  return b;
}

void add_quadratic_epigraph(ConicProgram& prog, const Matrix& F, const Vector& d, Index t_index, const Vector& f,
                            double c) {
  if (F.size() == 0) throw DimensionError("add_quadratic_epigraph: empty factor");
  require_dims(F.cols() == prog.num_vars, "add_quadratic_epigraph: factor width must equal num_vars");
  require_dims(f.size() == 0 || f.size() == F.rows(), "add_quadratic_epigraph: offset length");
  const Vector f2 = f.size() ? Vector(2.0 * f) : Vector(Vector::Zero(F.rows()));
  prog.soc_blocks.push_back(quadratic_epigraph_block(epigraph_body(F, prog.num_vars), f2, d, c, t_index));
}

// ---------------------------------------------------------------------------

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct SolverWorkspace::Impl {
  detail::PresolveCache presolve;
  detail::SchurCache schur;
};

SolverWorkspace::SolverWorkspace() : impl_(std::make_unique<Impl>()) {}
SolverWorkspace::~SolverWorkspace() = default;
SolverWorkspace::SolverWorkspace(SolverWorkspace&&) noexcept = default;
SolverWorkspace& SolverWorkspace::operator=(SolverWorkspace&&) noexcept = default;

double constraint_violation(const ConicProgram& prog, const Vector& x) {
  double v = 0.0;
  if (prog.eq_matrix) v = std::max(v, (*prog.eq_matrix * x - prog.eq_rhs).lpNorm<Eigen::Infinity>());
  if (prog.ineq_matrix) {
    const Vector g = *prog.ineq_matrix * x;
    for (Index r = 0; r < g.size(); ++r) {
      v = std::max(v, prog.ineq_lower(r) - g(r));
      v = std::max(v, g(r) - prog.ineq_upper(r));
    }
  }
  const SparseMatrix* last = nullptr;
  Vector Bx;
  for (const SocBlock& b : prog.soc_blocks) {
    if (b.body.get() != last) {
      last = b.body.get();
      Bx = *last * x;
    }
    Vector u(b.norm_rows());
    u.head(b.body->rows()) = Bx + b.body_offset;
    if (b.tail) u(b.body->rows()) = b.tail->dot(x) + b.tail_offset;
    v = std::max(v, u.norm() - (b.cone_c.dot(x) + b.cone_d));
  }
  return v;
}

namespace {

Solution finish_solution(const ConicProgram& prog, const detail::CoreResult& r, Vector x, double tol) {
  Solution s;
  s.iterations = r.iterations;
  s.diagnostics = r.message;
  switch (r.status) {
    case detail::CoreStatus::optimal: {
      s.x = std::move(x);
      s.objective_value = prog.objective.dot(s.x);
      s.primal_residual = constraint_violation(prog, s.x);
      s.status = SolveStatus::optimal;
      // Residual measured on the original program; reject anything far beyond tolerance.
      double scale = 1.0 + s.x.lpNorm<Eigen::Infinity>();
      if (!s.x.allFinite()) {
        s.status = SolveStatus::numerical_failure;
        s.diagnostics = "non-finite solution";
        s.x.resize(0);
      } else if (!(s.primal_residual <= std::sqrt(tol) * scale)) {
        s.status = SolveStatus::numerical_failure;
        s.diagnostics = "solution violates constraints by " + std::to_string(s.primal_residual);
        s.x.resize(0);
      }
      break;
    }
    case detail::CoreStatus::primal_infeasible: s.status = SolveStatus::infeasible; break;
    case detail::CoreStatus::dual_infeasible: s.status = SolveStatus::unbounded; break;
    default: s.status = SolveStatus::numerical_failure; break;
  }
  return s;
}

class PresolveIpm final : public SolverBackend {
public:
  std::string_view name() const override { return "presolve-ipm"; }
  Solution solve(const ConicProgram& prog, const SolverOptions& opts, SolverWorkspace& ws) const override {
    auto& impl = ws.impl();
    detail::Presolved pre = detail::presolve(prog, impl.presolve);
    if (pre.status == detail::Presolved::Status::infeasible) {
      Solution s;
      s.status = SolveStatus::infeasible;
      s.diagnostics = "presolve: " + pre.message;
      return s;
    }
    if (pre.status == detail::Presolved::Status::unbounded) {
      Solution s;
      s.status = SolveStatus::unbounded;
      s.diagnostics = "presolve: " + pre.message;
      return s;
    }
    detail::CoreResult r;
    if (pre.core.n == 0) {
      r.status = detail::CoreStatus::optimal;
      r.x = Vector(0);
    } else {
      r = detail::solve_core(pre.core, {opts.tol, opts.max_iterations}, &impl.schur);
    }
    Vector x = r.status == detail::CoreStatus::optimal ? detail::postsolve(prog, pre, r.x) : Vector();
    return finish_solution(prog, r, std::move(x), opts.tol);
  }
};

class ConicIpm final : public SolverBackend {
public:
  std::string_view name() const override { return "conic-ipm"; }
  Solution solve(const ConicProgram& prog, const SolverOptions& opts, SolverWorkspace&) const override {
    const detail::CoreProblem core = detail::to_core(prog);
    detail::CoreResult r = detail::solve_core(core, {opts.tol, opts.max_iterations}, nullptr);
    Vector x = r.status == detail::CoreStatus::optimal ? r.x : Vector();
    return finish_solution(prog, r, std::move(x), opts.tol);
  }
};

}  // namespace

const SolverBackend& solver_backend(std::string_view name) {
  static const PresolveIpm presolve_ipm;
  static const ConicIpm conic_ipm;
  if (name == presolve_ipm.name()) return presolve_ipm;
  if (name == conic_ipm.name()) return conic_ipm;
  throw ValueError("unknown solver backend: " + std::string(name));
}

std::vector<std::string> solver_backend_names() { return {"presolve-ipm", "conic-ipm"}; }

Solution solve(const ConicProgram& prog, const SolverOptions& opts, SolverWorkspace& ws) {
  prog.validate();
  require_value(opts.tol > 0.0, "solve: tolerance must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  Solution s = solver_backend(opts.backend).solve(prog, opts, ws);
  s.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

Solution solve(const ConicProgram& prog, const SolverOptions& opts) {
  SolverWorkspace ws;
  return solve(prog, opts, ws);
}

// ---------------------------------------------------------------------------

static void dump_matrix(std::ostream& out, const SparseMatrix& M) {
  for (Index r = 0; r < M.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(M, r); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

static void dump_bound(std::ostream& out, double v) {
  if (v == kInf)
    out << "inf";
  else if (v == -kInf)
    out << "-inf";
  else
    out << v;
}

void write_triplets(std::ostream& out, const ConicProgram& prog) {
  out << std::setprecision(17);
  out << "vars " << prog.num_vars << '\n';
  out << "objective\n";
  for (Index i = 0; i < prog.num_vars; ++i)
    if (prog.objective(i) != 0.0) out << i << ' ' << prog.objective(i) << '\n';
  out << "eq " << prog.num_eq() << '\n';
  if (prog.eq_matrix) {
    dump_matrix(out, *prog.eq_matrix);
    out << "rhs\n";
    for (Index r = 0; r < prog.num_eq(); ++r) out << r << ' ' << prog.eq_rhs(r) << '\n';
  }
  out << "ineq " << prog.num_ineq() << '\n';
  if (prog.ineq_matrix) {
    dump_matrix(out, *prog.ineq_matrix);
    out << "bounds\n";
    for (Index r = 0; r < prog.num_ineq(); ++r) {
      out << r << ' ';
      dump_bound(out, prog.ineq_lower(r));
      out << ' ';
      dump_bound(out, prog.ineq_upper(r));
      out << '\n';
    }
  }
  for (std::size_t q = 0; q < prog.soc_blocks.size(); ++q) {
    const SocBlock& b = prog.soc_blocks[q];
    out << "soc " << q << ' ' << b.norm_rows() << '\n';
    const Matrix M = b.dense_matrix();
    for (Index i = 0; i < M.rows(); ++i)
      for (Index j = 0; j < M.cols(); ++j)
        if (M(i, j) != 0.0) out << i << ' ' << j << ' ' << M(i, j) << '\n';
    out << "offset\n";
    const Vector o = b.offset();
    for (Index i = 0; i < o.size(); ++i) out << i << ' ' << o(i) << '\n';
    out << "cone\n";
    for (Index j = 0; j < prog.num_vars; ++j)
      if (b.cone_c(j) != 0.0) out << j << ' ' << b.cone_c(j) << '\n';
    out << "d " << b.cone_d << '\n';
  }
}

}  // namespace rdeep
