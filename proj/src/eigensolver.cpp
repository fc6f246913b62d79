// eigensolver.cpp: Lowest eigenpairs of sparse, narrow-band Hermitian matrices

#include "twophoton/eigensolver.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace twophoton::linalg {

namespace {

template <typename Scalar>
using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Sparse = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, std::int64_t>;

// std::complex<double> and the LAPACK complex type share layout.
lapack_complex_double* lapack_ptr(Complex* p) { return reinterpret_cast<lapack_complex_double*>(p); }
const lapack_complex_double* lapack_ptr(const Complex* p) {
    return reinterpret_cast<const lapack_complex_double*>(p);
}

lapack_int pbtrf(lapack_int n, lapack_int kd, double* ab) {
    return LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', n, kd, ab, kd + 1);
}
lapack_int pbtrf(lapack_int n, lapack_int kd, Complex* ab) {
    return LAPACKE_zpbtrf(LAPACK_COL_MAJOR, 'L', n, kd, lapack_ptr(ab), kd + 1);
}
lapack_int pbtrs(lapack_int n, lapack_int kd, lapack_int nrhs, const double* ab, double* b) {
    return LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'L', n, kd, nrhs, ab, kd + 1, b, n);
}
lapack_int pbtrs(lapack_int n, lapack_int kd, lapack_int nrhs, const Complex* ab, Complex* b) {
    return LAPACKE_zpbtrs(LAPACK_COL_MAJOR, 'L', n, kd, nrhs, lapack_ptr(ab), kd + 1, lapack_ptr(b), n);
}

// A − shift·I in LAPACK lower band storage, Cholesky-factored in place.
template <typename Scalar>
class BandCholesky {
public:
    BandCholesky(const Sparse<Scalar>& a, std::size_t kd)
        : a_(a), n_(static_cast<lapack_int>(a.rows())), kd_(static_cast<lapack_int>(kd)) {}

    bool factor(double shift) {
        ab_.setZero(kd_ + 1, n_);
        for (std::int64_t c = 0; c < a_.outerSize(); ++c)
            for (typename Sparse<Scalar>::InnerIterator it(a_, c); it; ++it)
                if (it.row() >= it.col())
                    ab_(it.row() - it.col(), it.col()) = it.value();
        for (lapack_int j = 0; j < n_; ++j)
            ab_(0, j) -= shift;
        const lapack_int info = pbtrf(n_, kd_, ab_.data());
        if (info < 0)
            throw std::runtime_error("band Cholesky: invalid argument " + std::to_string(-info));
        return info == 0;
    }

    void solve(Dense<Scalar>& rhs) const {
        const lapack_int info = pbtrs(n_, kd_, static_cast<lapack_int>(rhs.cols()), ab_.data(), rhs.data());
        if (info != 0)
            throw std::runtime_error("band Cholesky solve failed with info " + std::to_string(info));
    }

private:
    const Sparse<Scalar>& a_;
    lapack_int n_;
    lapack_int kd_;
    Dense<Scalar> ab_;
};

// Shift strictly below the lowest eigenvalue, as close as a few Cholesky probes allow.
template <typename Scalar>
void factor_below_spectrum(const Sparse<Scalar>& a, BandCholesky<Scalar>& chol) {
    const std::int64_t m = std::min<std::int64_t>(a.rows(), 300);
    const Dense<Scalar> lead = Sparse<Scalar>(a.topLeftCorner(m, m));
    Eigen::SelfAdjointEigenSolver<Dense<Scalar>> es(lead, Eigen::EigenvaluesOnly);
    // Principal submatrix: its lowest eigenvalue bounds the full one from above.
    const double upper = es.eigenvalues()(0);
    double step = 1e-2 * std::max(1.0, std::abs(upper));

    double lo = upper - step;
    double hi = upper;
    bool failed_once = false;
    for (int probe = 0; !chol.factor(lo); ++probe) {
        if (probe > 200)
            throw std::runtime_error("could not place a shift below the spectrum");
        failed_once = true;
        hi = lo;
        step *= 4.0;
        lo = upper - step;
    }
    if (failed_once) {
        for (int b = 0; b < 10; ++b) {
            const double mid = 0.5 * (lo + hi);
            if (chol.factor(mid))
                lo = mid;
            else
                hi = mid;
        }
    }
    if (!chol.factor(lo))
        throw std::runtime_error("shift factorization lost");
}

template <typename Scalar>
Dense<Scalar> orthonormal_columns(const Dense<Scalar>& y) {
    Eigen::HouseholderQR<Dense<Scalar>> qr(y);
    return qr.householderQ() * Dense<Scalar>::Identity(y.rows(), y.cols());
}

template <typename Scalar>
void fill_random(Dense<Scalar>& x, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if constexpr (std::is_same_v<Scalar, double>)
                x(i, j) = normal(rng);
            else
                x(i, j) = Scalar(normal(rng), normal(rng));
        }
}

// Block Krylov iteration on (A − σ)⁻¹ with Rayleigh–Ritz on A. Each sweep spans
// [X, SX, S²X, …]; the block width covers any degeneracy that fits inside it.
template <typename Scalar>
EigenPairs block_krylov(const Sparse<Scalar>& a, std::size_t count, std::size_t kd, const EigenSolverOptions& opts) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    const auto p = static_cast<Eigen::Index>(count + std::max<std::size_t>(10, count / 2));
    constexpr int krylov_depth = 3;

    BandCholesky<Scalar> chol(a, kd);
    factor_below_spectrum(a, chol);

    std::mt19937_64 rng(0x5eed2b0b);
    Dense<Scalar> x(n, p);
    fill_random(x, rng);
    x = orthonormal_columns(x);

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        Dense<Scalar> basis(n, p * (krylov_depth + 1));
        basis.leftCols(p) = x;
        Dense<Scalar> w = x;
        for (int d = 1; d <= krylov_depth; ++d) {
            chol.solve(w);
            const auto done_cols = p * d;
            for (int pass = 0; pass < 2; ++pass)
                w -= basis.leftCols(done_cols) * (basis.leftCols(done_cols).adjoint() * w);
            w = orthonormal_columns(w);
            basis.middleCols(done_cols, p) = w;
        }
        const Dense<Scalar> ab = a * basis;
        Dense<Scalar> g = basis.adjoint() * ab;
        g = (0.5 * (g + g.adjoint())).eval();
        Eigen::SelfAdjointEigenSolver<Dense<Scalar>> ritz(g);
        const Dense<Scalar> u = ritz.eigenvectors().leftCols(p);
        const Eigen::VectorXd theta = ritz.eigenvalues().head(p);
        x = basis * u;
        const Dense<Scalar> ax = ab * u;

        bool converged = true;
        for (std::size_t i = 0; i < count && converged; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            const double res = (ax.col(c) - theta(c) * x.col(c)).norm();
            converged = res <= opts.residual_tol * std::max(1.0, std::abs(theta(c)));
        }
        if (converged) {
            const auto k = static_cast<Eigen::Index>(count);
            return {theta.head(k), x.leftCols(k).template cast<Complex>()};
        }
    }
    throw std::runtime_error("block Krylov iteration did not converge in " + std::to_string(opts.max_iterations) +
                             " sweeps (n = " + std::to_string(n) + ")");
}

bool is_real(const SparseMatrix& a) {
    for (std::int64_t c = 0; c < a.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(a, c); it; ++it)
            if (it.value().imag() != 0.0)
                return false;
    return true;
}

} // namespace

std::size_t bandwidth(const SparseMatrix& a) {
    std::size_t kd = 0;
    for (std::int64_t c = 0; c < a.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(a, c); it; ++it)
            kd = std::max<std::size_t>(kd, static_cast<std::size_t>(std::abs(it.row() - it.col())));
    return kd;
}

EigenPairs dense_eigenpairs(const SparseMatrix& a, std::size_t count) {
    const auto n = static_cast<std::size_t>(a.rows());
    if (count > n)
        throw std::invalid_argument("requested " + std::to_string(count) + " eigenpairs of a " + std::to_string(n) +
                                    "-dimensional matrix");
    const auto k = static_cast<Eigen::Index>(count);
    if (is_real(a)) {
        const Eigen::MatrixXd full = Eigen::MatrixXd(Sparse<double>(a.real()));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(full);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("dense symmetric eigensolver failed");
        return {es.eigenvalues().head(k), es.eigenvectors().leftCols(k).cast<Complex>()};
    }
    const Eigen::MatrixXcd full(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(full);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("dense Hermitian eigensolver failed");
    return {es.eigenvalues().head(k), es.eigenvectors().leftCols(k)};
}

EigenPairs lowest_eigenpairs(const SparseMatrix& a, std::size_t count, const EigenSolverOptions& opts) {
    const auto n = static_cast<std::size_t>(a.rows());
    if (count > n)
        throw std::invalid_argument("requested " + std::to_string(count) + " eigenpairs of a " + std::to_string(n) +
                                    "-dimensional matrix");
    if (count == 0)
        return {Eigen::VectorXd(0), Eigen::MatrixXcd(static_cast<Eigen::Index>(n), 0)};

    const std::size_t kd = bandwidth(a);
    const std::size_t block = count + std::max<std::size_t>(10, count / 2);
    if (n <= opts.dense_limit || 4 * kd > n || 12 * block > n)
        return dense_eigenpairs(a, count);
    if (is_real(a))
        return block_krylov<double>(Sparse<double>(a.real()), count, kd, opts);
    return block_krylov<Complex>(a, count, kd, opts);
}

} // namespace twophoton::linalg
