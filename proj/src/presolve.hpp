#pragma once

#include "ipm.hpp"
#include "rdeep/conic.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rdeep::detail {

/// Reuse across solves: lifted Hessians keyed by cone body, restricted Hessians keyed by kept columns.
struct PresolveCache {
  const SparseMatrix* body_key = nullptr;
  std::shared_ptr<const SparseMatrix> body_hold;
  double weight_key = 0.0;
  std::shared_ptr<const Matrix> P_full;
  const SparseMatrix* support_key = nullptr;
  std::shared_ptr<const SparseMatrix> support_hold;
  std::vector<char> support;

  const Matrix* core_src_key = nullptr;
  std::vector<Index> core_keep_key;
  std::shared_ptr<const Matrix> P_core;
};

struct LiftedGroup {
  Index t_index = -1;
  std::vector<std::size_t> blocks;  // indices into prog.soc_blocks
};

struct Substitution {
  Index var;
  double rhs;
  double coef;  // coefficient of var
  std::vector<std::pair<Index, double>> others;
};

struct Presolved {
  enum class Status { reduced, infeasible, unbounded } status = Status::reduced;
  std::string message;
  CoreProblem core;
  std::vector<Index> core_to_orig;
  std::vector<double> fixed;  // NaN where not fixed
  std::vector<Substitution> subs;
  LiftedGroup lifted;
  int rows_removed = 0;
  int cols_removed = 0;
};

Presolved presolve(const ConicProgram& prog, PresolveCache& cache);

/// Maps a core solution back to the original variable space.
Vector postsolve(const ConicProgram& prog, const Presolved& pre, const Vector& core_x);

/// Direct translation without reductions (cones kept as-is).
CoreProblem to_core(const ConicProgram& prog);

}  // namespace rdeep::detail
