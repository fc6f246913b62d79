// model.cpp: Two-photon Dicke Hamiltonian, drive operators and the analytic collapse coupling

#include "twophoton/model.hpp"

#include <stdexcept>

namespace twophoton {

std::string to_string(CouplingForm form) {
    return form == CouplingForm::FullQuadratic ? "full_quadratic" : "pair_only";
}

CouplingForm coupling_form_from_string(const std::string& name) {
    if (name == "full_quadratic")
        return CouplingForm::FullQuadratic;
    if (name == "pair_only")
        return CouplingForm::PairOnly;
    throw std::invalid_argument("unknown coupling form '" + name + "' (expected full_quadratic or pair_only)");
}

void ModelParams::validate() const {
    if (!(omega_c > 0.0))
        throw std::invalid_argument("omega_c must be > 0");
    if (!(g2 >= 0.0))
        throw std::invalid_argument("g2 must be >= 0");
    if (!(j_interspin >= 0.0))
        throw std::invalid_argument("j_interspin must be >= 0");
    if (n_qubits < 1)
        throw std::invalid_argument("n_qubits must be >= 1");
}

SparseOperator build_hamiltonian(const ModelParams& params, const HilbertSpace& space) {
    params.validate();
    if (space.n_qubits() != params.n_qubits)
        throw std::invalid_argument("build_hamiltonian: space has " + std::to_string(space.n_qubits()) +
                                    " qubits, params have " + std::to_string(params.n_qubits));

    const int n = params.n_qubits;
    const auto spin_dim = static_cast<std::int64_t>(space.spin_dim());
    const auto boson_dim = static_cast<std::int64_t>(space.boson_dim());

    SparseMatrix spin_id(spin_dim, spin_dim);
    spin_id.setIdentity();
    SparseMatrix boson_id(boson_dim, boson_dim);
    boson_id.setIdentity();

    const SparseMatrix a = boson_annihilation(space.n_max());
    const SparseMatrix number = SparseMatrix(a.adjoint()) * a;
    const SparseMatrix coupling = params.coupling_form == CouplingForm::FullQuadratic
                                      ? boson_field_quadratic(space.n_max())
                                      : boson_pair_field(space.n_max());

    SparseMatrix spin_part = Complex(0.5 * params.omega_q) * collective_spin(n, PauliAxis::Z);
    for (int i = 1; i < n; ++i)
        spin_part += Complex(params.j_interspin) *
                     SparseMatrix(spin_pauli(n, i, PauliAxis::X) * spin_pauli(n, i + 1, PauliAxis::X));

    SparseMatrix h = Complex(params.omega_c) * kron(spin_id, number) + kron(spin_part, boson_id) +
                     Complex(params.g2) * kron(collective_spin(n, PauliAxis::X), coupling);
    h.prune(Complex(0.0));
    return SparseOperator(std::move(h));
}

CollapseCoupling collapse_coupling(const ModelParams& params) {
    params.validate();
    return {params.omega_c / (4.0 * params.n_qubits), params.coupling_form != CouplingForm::FullQuadratic};
}

std::string DriveTarget::to_string() const {
    return kind == Kind::Cavity ? "cavity" : "qubit:" + std::to_string(qubit);
}

DriveTarget DriveTarget::parse(const std::string& text) {
    if (text == "cavity")
        return on_cavity();
    if (text == "qubit")
        return on_qubit(1);
    if (text.rfind("qubit:", 0) == 0) {
        const std::string idx = text.substr(6);
        std::size_t used = 0;
        int i = 0;
        try {
            i = std::stoi(idx, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != idx.size())
            throw std::invalid_argument("bad qubit index in drive target '" + text + "'");
        return on_qubit(i);
    }
    throw std::invalid_argument("unknown drive target '" + text + "' (expected cavity or qubit:<i>)");
}

SparseOperator build_drive_operator(const HilbertSpace& space, const DriveTarget& target) {
    if (target.kind == DriveTarget::Kind::Cavity)
        return field(space);
    return pauli(space, target.qubit, PauliAxis::X);
}

} // namespace twophoton
