// model.hpp: Two-photon Dicke Hamiltonian, drive operators and the analytic collapse coupling

#pragma once

#include <string>

#include "twophoton/operators.hpp"

namespace twophoton {

enum class CouplingForm {
    FullQuadratic, // g σ_x (a† + a)^2
    PairOnly,      // g σ_x (a†a† + aa)
};

std::string to_string(CouplingForm form);
CouplingForm coupling_form_from_string(const std::string& name);

struct ModelParams {
    double omega_c{1.0};
    double omega_q{2.0};
    double g2{0.0};
    int n_qubits{1};
    CouplingForm coupling_form{CouplingForm::FullQuadratic};
    double j_interspin{0.0}; // open chain, 0 disables

    // Throws std::invalid_argument on omega_c <= 0, g2 < 0, j < 0 or n_qubits < 1.
    void validate() const;
};

// ω_c a†a + (ω_q/2) Σσ_z + g2 Σσ_x F + J Σ_{i<N} σ_x^i σ_x^{i+1}
SparseOperator build_hamiltonian(const ModelParams& params, const HilbertSpace& space);

struct CollapseCoupling {
    double value;
    // Set for PairOnly: the closed form is only established for the full-quadratic coupling.
    bool form_dependent;
};

CollapseCoupling collapse_coupling(const ModelParams& params);

struct DriveTarget {
    enum class Kind { Qubit, Cavity };
    Kind kind{Kind::Qubit};
    int qubit{1};

    static DriveTarget on_qubit(int index) { return {Kind::Qubit, index}; }
    static DriveTarget on_cavity() { return {Kind::Cavity, 0}; }

    std::string to_string() const;
    static DriveTarget parse(const std::string& text);
};

// σ_x^{(i)} for a qubit port, (a† + a) for the cavity port.
SparseOperator build_drive_operator(const HilbertSpace& space, const DriveTarget& target);

} // namespace twophoton
