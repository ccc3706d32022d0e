#pragma once

#include "rdeep/common.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rdeep {

/// Second-order cone ||[body x + body_offset; tail x + tail_offset]|| <= cone_c' x + cone_d.
struct SocBlock {
  std::shared_ptr<const SparseMatrix> body;
  Vector body_offset;
  std::optional<Vector> tail;  // one extra dense row in the norm part
  double tail_offset = 0.0;
  Vector cone_c;
  double cone_d = 0.0;

  Index norm_rows() const { return body->rows() + (tail ? 1 : 0); }
  /// Stacked norm-part matrix and offset.
  Matrix dense_matrix() const;
  Vector offset() const;
};

/// min objective' x  s.t.  eq x = eq_rhs, lower <= ineq x <= upper, SOC blocks.
struct ConicProgram {
  Index num_vars = 0;
  Vector objective;
  std::shared_ptr<const SparseMatrix> eq_matrix;
  Vector eq_rhs;
  std::shared_ptr<const SparseMatrix> ineq_matrix;
  Vector ineq_lower;  // -inf allowed
  Vector ineq_upper;  // +inf allowed
  std::vector<SocBlock> soc_blocks;

  Index num_eq() const { return eq_matrix ? eq_matrix->rows() : 0; }
  Index num_ineq() const { return ineq_matrix ? ineq_matrix->rows() : 0; }
  /// Equality rows + finite inequality sides + cone blocks.
  Index num_constraint_rows() const;
  void validate() const;
};

/// Row-oriented assembly of a ConicProgram.
class ProgramBuilder {
public:
  explicit ProgramBuilder(Index num_vars);

  Index num_vars() const { return n_; }
  void set_objective(Vector c);
  void set_objective_entry(Index i, double v);

  void add_eq_row(const std::vector<std::pair<Index, double>>& entries, double rhs);
  void add_ineq_row(const std::vector<std::pair<Index, double>>& entries, double lower, double upper);
  /// Dense block occupying columns [col, col + rows.cols()).
  void add_eq_rows(const Matrix& rows, Index col, const Vector& rhs);
  void add_ineq_rows(const Matrix& rows, Index col, const Vector& lower, const Vector& upper);
  void add_soc(SocBlock block);

  ConicProgram finish();

private:
  Index n_;
  Vector c_;
  std::vector<Eigen::Triplet<double>> eq_, ineq_;
  std::vector<double> eq_rhs_, lo_, hi_;
  std::vector<SocBlock> socs_;
};

/// Places 2F into a num_vars-wide sparse matrix starting at column col (the shared body of an epigraph cone).
std::shared_ptr<const SparseMatrix> epigraph_body(const Matrix& F, Index num_vars, Index col = 0);

/// Cone block for ||F x + f||^2 + d' x + c <= x[t_index], with body = 2F already placed.
SocBlock quadratic_epigraph_block(std::shared_ptr<const SparseMatrix> body_2F, const Vector& f2, const Vector& d,
                                  double c, Index t_index);

/// Appends ||F x + f||^2 + d' x + c <= x[t_index] to prog via the rotated-cone encoding.
void add_quadratic_epigraph(ConicProgram& prog, const Matrix& F, const Vector& d, Index t_index,
                            const Vector& f = Vector(), double c = 0.0);

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure };

std::string to_string(SolveStatus s);

struct Solution {
  SolveStatus status = SolveStatus::numerical_failure;
  Vector x;  // empty unless optimal
  double objective_value = 0.0;
  double solve_time = 0.0;  // s
  int iterations = 0;
  double primal_residual = 0.0;
  std::string diagnostics;

  bool optimal() const { return status == SolveStatus::optimal; }
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 100;
  std::string backend = "presolve-ipm";
};

/// Caches reused across solves of structurally similar programs. Not thread-safe; one per solving thread.
class SolverWorkspace {
public:
  SolverWorkspace();
  ~SolverWorkspace();
  SolverWorkspace(SolverWorkspace&&) noexcept;
  SolverWorkspace& operator=(SolverWorkspace&&) noexcept;
  SolverWorkspace(const SolverWorkspace&) = delete;
  SolverWorkspace& operator=(const SolverWorkspace&) = delete;

  struct Impl;
  Impl& impl() { return *impl_; }

private:
  std::unique_ptr<Impl> impl_;
};

class SolverBackend {
public:
  virtual ~SolverBackend() = default;
  virtual std::string_view name() const = 0;
  virtual Solution solve(const ConicProgram& prog, const SolverOptions& opts, SolverWorkspace& ws) const = 0;
};

/// Registered backends: "presolve-ipm" (default) and "conic-ipm" (no presolve).
const SolverBackend& solver_backend(std::string_view name);
std::vector<std::string> solver_backend_names();

Solution solve(const ConicProgram& prog, const SolverOptions& opts, SolverWorkspace& ws);
Solution solve(const ConicProgram& prog, const SolverOptions& opts = {});

/// Largest violation of any constraint of prog at x (cones measured as c'x + d - ||.||).
double constraint_violation(const ConicProgram& prog, const Vector& x);

/// Plain-text dump; every matrix section lists `i j value` rows.
void write_triplets(std::ostream& out, const ConicProgram& prog);

}  // namespace rdeep
