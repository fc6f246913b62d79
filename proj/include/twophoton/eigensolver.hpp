// eigensolver.hpp: Lowest eigenpairs of sparse, narrow-band Hermitian matrices

#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "twophoton/operators.hpp"

namespace twophoton::linalg {

struct EigenPairs {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXcd vectors; // orthonormal columns
};

struct EigenSolverOptions {
    // Matrices up to this size go straight to a dense solver.
    std::size_t dense_limit{600};
    double residual_tol{1e-10};
    int max_iterations{2000};
    bool compute_vectors{true};
};

// Half-bandwidth of a square sparse matrix: max |row - col| over stored entries.
std::size_t bandwidth(const SparseMatrix& a);

// Lowest `count` eigenpairs of a Hermitian matrix. Large inputs are handled by shift-invert
// subspace iteration on a banded Cholesky factor with the shift placed strictly below the
// spectrum, so exact degeneracies are resolved as long as they fit in the search block.
EigenPairs lowest_eigenpairs(const SparseMatrix& a, std::size_t count, const EigenSolverOptions& opts = {});

// Reference path: dense Hermitian diagonalization of the whole matrix.
EigenPairs dense_eigenpairs(const SparseMatrix& a, std::size_t count);

} // namespace twophoton::linalg
