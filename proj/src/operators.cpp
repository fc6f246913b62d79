// operators.cpp: Sparse bosonic and spin operators on the truncated qubits ⊗ cavity space

#include "twophoton/operators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace twophoton {

namespace {

using Triplet = Eigen::Triplet<Complex, std::int64_t>;

SparseMatrix from_triplets(std::int64_t dim, const std::vector<Triplet>& triplets) {
    SparseMatrix m(dim, dim);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

SparseMatrix sparse_identity(std::int64_t dim) {
    SparseMatrix m(dim, dim);
    m.setIdentity();
    m.makeCompressed();
    return m;
}

SparseMatrix pauli_2x2(PauliAxis axis) {
    std::vector<Triplet> t;
    switch (axis) {
    case PauliAxis::X:
        t = {{0, 1, 1.0}, {1, 0, 1.0}};
        break;
    case PauliAxis::Y:
        t = {{0, 1, Complex(0.0, -1.0)}, {1, 0, Complex(0.0, 1.0)}};
        break;
    case PauliAxis::Z:
        t = {{0, 0, 1.0}, {1, 1, -1.0}};
        break;
    }
    return from_triplets(2, t);
}

SparseOperator embed_boson(const HilbertSpace& space, const SparseMatrix& boson) {
    return SparseOperator(kron(sparse_identity(static_cast<std::int64_t>(space.spin_dim())), boson));
}

} // namespace

HilbertSpace::HilbertSpace(int n_qubits, int n_max) : n_qubits_(n_qubits), n_max_(n_max) {
    if (n_qubits < 1)
        throw std::invalid_argument("HilbertSpace: n_qubits must be >= 1");
    if (n_qubits > 12)
        throw std::invalid_argument("HilbertSpace: n_qubits above 12 is not supported");
    if (n_max < 0)
        throw std::invalid_argument("HilbertSpace: n_max must be >= 0");
}

SparseOperator::SparseOperator(SparseMatrix matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols())
        throw std::invalid_argument("SparseOperator: matrix must be square");
    matrix_.makeCompressed();
}

Complex SparseOperator::entry(std::size_t row, std::size_t col) const {
    return matrix_.coeff(static_cast<std::int64_t>(row), static_cast<std::int64_t>(col));
}

bool SparseOperator::is_hermitian() const {
    for (std::int64_t c = 0; c < matrix_.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it)
            if (matrix_.coeff(it.col(), it.row()) != std::conj(it.value()))
                return false;
    return true;
}

bool SparseOperator::is_anti_hermitian() const {
    for (std::int64_t c = 0; c < matrix_.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it)
            if (matrix_.coeff(it.col(), it.row()) != -std::conj(it.value()))
                return false;
    return true;
}

double SparseOperator::max_abs_entry() const {
    double m = 0.0;
    for (std::int64_t c = 0; c < matrix_.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it)
            m = std::max(m, std::abs(it.value()));
    return m;
}

SparseOperator SparseOperator::adjoint() const {
    return SparseOperator(SparseMatrix(matrix_.adjoint()));
}

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(SparseMatrix(a.matrix_ + b.matrix_));
}

SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(SparseMatrix(a.matrix_ - b.matrix_));
}

SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(SparseMatrix(a.matrix_ * b.matrix_));
}

SparseOperator operator*(Complex s, const SparseOperator& a) {
    return SparseOperator(SparseMatrix(s * a.matrix_));
}

SparseOperator commutator(const SparseOperator& a, const SparseOperator& b) {
    SparseMatrix c = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    c.prune(Complex(0.0));
    return SparseOperator(std::move(c));
}

SparseOperator identity(const HilbertSpace& space) {
    return SparseOperator(sparse_identity(static_cast<std::int64_t>(space.dimension())));
}

SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
    for (std::int64_t ca = 0; ca < a.outerSize(); ++ca)
        for (SparseMatrix::InnerIterator ia(a, ca); ia; ++ia)
            for (std::int64_t cb = 0; cb < b.outerSize(); ++cb)
                for (SparseMatrix::InnerIterator ib(b, cb); ib; ++ib)
                    t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                                   ia.value() * ib.value());
    SparseMatrix m(a.rows() * b.rows(), a.cols() * b.cols());
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

SparseMatrix boson_annihilation(int n_max) {
    std::vector<Triplet> t;
    for (int n = 1; n <= n_max; ++n)
        t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
    return from_triplets(n_max + 1, t);
}

SparseMatrix boson_field_quadratic(int n_max) {
    const SparseMatrix a = boson_annihilation(n_max);
    const SparseMatrix x = SparseMatrix(a.adjoint()) + a;
    SparseMatrix x2 = x * x;
    x2.prune(Complex(0.0));
    x2.makeCompressed();
    return x2;
}

SparseMatrix boson_pair_field(int n_max) {
    std::vector<Triplet> t;
    for (int n = 0; n + 2 <= n_max; ++n) {
        const double v = std::sqrt(static_cast<double>(n + 1)) * std::sqrt(static_cast<double>(n + 2));
        t.emplace_back(n + 2, n, v);
        t.emplace_back(n, n + 2, v);
    }
    return from_triplets(n_max + 1, t);
}

SparseMatrix spin_pauli(int n_qubits, int qubit_index, PauliAxis axis) {
    if (qubit_index < 1 || qubit_index > n_qubits)
        throw std::out_of_range("qubit index " + std::to_string(qubit_index) + " outside 1.." +
                                std::to_string(n_qubits));
    SparseMatrix m = sparse_identity(1);
    for (int q = 1; q <= n_qubits; ++q)
        m = kron(m, q == qubit_index ? pauli_2x2(axis) : sparse_identity(2));
    return m;
}

SparseMatrix collective_spin(int n_qubits, PauliAxis axis) {
    SparseMatrix sum(std::int64_t{1} << n_qubits, std::int64_t{1} << n_qubits);
    for (int q = 1; q <= n_qubits; ++q)
        sum += spin_pauli(n_qubits, q, axis);
    sum.makeCompressed();
    return sum;
}

SparseOperator annihilation(const HilbertSpace& space) {
    return embed_boson(space, boson_annihilation(space.n_max()));
}

SparseOperator number_operator(const HilbertSpace& space) {
    std::vector<Triplet> t;
    for (int n = 1; n <= space.n_max(); ++n)
        t.emplace_back(n, n, static_cast<double>(n));
    return embed_boson(space, from_triplets(space.n_max() + 1, t));
}

SparseOperator field(const HilbertSpace& space) {
    const SparseMatrix a = boson_annihilation(space.n_max());
    return embed_boson(space, SparseMatrix(SparseMatrix(a.adjoint()) + a));
}

SparseOperator field_quadratic(const HilbertSpace& space) {
    return embed_boson(space, boson_field_quadratic(space.n_max()));
}

SparseOperator pair_field(const HilbertSpace& space) {
    return embed_boson(space, boson_pair_field(space.n_max()));
}

SparseOperator pauli(const HilbertSpace& space, int qubit_index, PauliAxis axis) {
    return SparseOperator(kron(spin_pauli(space.n_qubits(), qubit_index, axis),
                               sparse_identity(static_cast<std::int64_t>(space.boson_dim()))));
}

SparseOperator photon_parity(const HilbertSpace& space) {
    std::vector<Triplet> t;
    for (int n = 0; n <= space.n_max(); ++n)
        t.emplace_back(n, n, n % 2 == 0 ? 1.0 : -1.0);
    return embed_boson(space, from_triplets(space.n_max() + 1, t));
}

} // namespace twophoton
