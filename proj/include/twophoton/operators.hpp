// operators.hpp: Sparse bosonic and spin operators on the truncated qubits ⊗ cavity space

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>

#include <Eigen/Sparse>

namespace twophoton {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, std::int64_t>;

// Tensor ordering is qubit 1 ⊗ … ⊗ qubit N ⊗ boson, boson index fastest.
// Within a qubit factor, basis state 0 is σ_z = +1 and state 1 is σ_z = −1.
class HilbertSpace {
public:
    HilbertSpace(int n_qubits, int n_max);

    int n_qubits() const { return n_qubits_; }
    int n_max() const { return n_max_; }
    std::size_t boson_dim() const { return static_cast<std::size_t>(n_max_) + 1; }
    std::size_t spin_dim() const { return std::size_t{1} << n_qubits_; }
    std::size_t dimension() const { return spin_dim() * boson_dim(); }

    std::size_t index(std::size_t spin_config, int photons) const {
        return spin_config * boson_dim() + static_cast<std::size_t>(photons);
    }
    int photon_number(std::size_t idx) const { return static_cast<int>(idx % boson_dim()); }
    std::size_t spin_config(std::size_t idx) const { return idx / boson_dim(); }

    bool operator==(const HilbertSpace&) const = default;

private:
    int n_qubits_;
    int n_max_;
};

enum class PauliAxis { X, Y, Z };

// Immutable sparse matrix tagged with the dimension of the space it acts on.
// Entries are stored column-major and compressed, so assembly order is reproducible.
class SparseOperator {
public:
    SparseOperator() = default;
    explicit SparseOperator(SparseMatrix matrix);

    std::size_t dimension() const { return static_cast<std::size_t>(matrix_.rows()); }
    const SparseMatrix& matrix() const { return matrix_; }
    Complex entry(std::size_t row, std::size_t col) const;

    // Entrywise, zero tolerance.
    bool is_hermitian() const;
    bool is_anti_hermitian() const;
    double max_abs_entry() const;

    SparseOperator adjoint() const;

    friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b);
    friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b);
    friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b);
    friend SparseOperator operator*(Complex s, const SparseOperator& a);

private:
    SparseMatrix matrix_;
};

SparseOperator commutator(const SparseOperator& a, const SparseOperator& b);
SparseOperator identity(const HilbertSpace& space);

// Kronecker product with deterministic triplet order.
SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b);

// Single-mode building blocks of size (n_max + 1).
SparseMatrix boson_annihilation(int n_max);
SparseMatrix boson_field_quadratic(int n_max);
SparseMatrix boson_pair_field(int n_max);

// Σ_i σ_axis^{(i)} on the 2^N spin factor only.
SparseMatrix collective_spin(int n_qubits, PauliAxis axis);
// σ_axis on one qubit (1-based) of the spin factor.
SparseMatrix spin_pauli(int n_qubits, int qubit_index, PauliAxis axis);

SparseOperator annihilation(const HilbertSpace& space);
SparseOperator number_operator(const HilbertSpace& space);
// (a† + a) on the truncated mode.
SparseOperator field(const HilbertSpace& space);
// Square of the truncated (a† + a); the last diagonal entry misses the a a† contribution
// that would come through |n_max + 1⟩.
SparseOperator field_quadratic(const HilbertSpace& space);
SparseOperator pair_field(const HilbertSpace& space);
SparseOperator pauli(const HilbertSpace& space, int qubit_index, PauliAxis axis);
SparseOperator photon_parity(const HilbertSpace& space);

} // namespace twophoton
