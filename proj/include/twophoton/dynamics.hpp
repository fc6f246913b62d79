// dynamics.hpp: Driven-dissipative evolution in the dressed basis and the resulting fluorescence spectrum

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twophoton/model.hpp"
#include "twophoton/spectrum.hpp"

namespace twophoton {

struct DissipationSpec {
    double kappa_cavity{1e-3};
    double kappa_qubit{1e-3};
    int spectral_exponent{1}; // d in (ω_kj/ω_c)^d, 0 or 1
    std::size_t n_dressed{40};

    void validate() const;
};

struct DriveSpec {
    double amplitude{5e-4};
    std::optional<double> frequency; // unset: resonant with Ψ0+ → Ψ2+
    DriveTarget target{DriveTarget::on_qubit(1)};

    void validate() const;
};

// E(Ψ2+) − E(Ψ0+). Requires the first three even levels to be retained and converged.
double resonant_drive_frequency(const EigenDecomposition& eigs);

struct JumpTerm {
    std::size_t lower; // j
    std::size_t upper; // k, E_k > E_j
    double rate;
};

// γ_jk = κ (ω_kj/ω_c)^d |⟨j|X|k⟩|² for every downward pair among the first m_levels levels;
// terms below 1e−14·κ are dropped.
std::vector<JumpTerm> dressed_jump_operators(const EigenDecomposition& eigs, const SparseOperator& x, double kappa,
                                             int spectral_exponent, std::size_t m_levels, double omega_c = 1.0);

// L(t)ρ = −i[H_d + Ω cos(ω_d t) D, ρ] + Σ γ_jk D[|j⟩⟨k|]ρ on M dressed states.
class LindbladGenerator {
public:
    LindbladGenerator(Eigen::VectorXd energies, std::vector<JumpTerm> jumps, Eigen::MatrixXcd drive_matrix,
                      double amplitude, double frequency);

    // Cavity channel through (a + a†), one qubit channel per σ_x^{(i)}, drive from the spec.
    static LindbladGenerator build(const EigenDecomposition& eigs, const ModelParams& params,
                                   const DissipationSpec& dissipation, const DriveSpec& drive);

    std::size_t dimension() const { return static_cast<std::size_t>(energies_.size()); }
    const Eigen::VectorXd& energies() const { return energies_; }
    const std::vector<JumpTerm>& jump_terms() const { return jumps_; }
    const Eigen::MatrixXcd& drive_matrix() const { return drive_; }
    double amplitude() const { return amplitude_; }
    double frequency() const { return frequency_; }
    double period() const;
    // Γ_k = Σ_j γ_jk, total decay rate out of level k.
    const Eigen::VectorXd& decay_rates() const { return decay_; }
    // Rate matrix of the population dynamics: ṗ = W p.
    const Eigen::MatrixXd& population_rates() const { return population_rates_; }
    // Smallest channel coupling κ, used for the default transient cap. Defaults to the smallest
    // nonzero jump rate when the generator is assembled by hand.
    double reference_rate() const { return reference_rate_; }
    void set_reference_rate(double rate) { reference_rate_ = rate; }

    Eigen::MatrixXcd apply_static(const Eigen::MatrixXcd& rho) const;
    // −i[D, ρ] at unit amplitude.
    Eigen::MatrixXcd apply_drive(const Eigen::MatrixXcd& rho) const;
    Eigen::MatrixXcd apply(double t, const Eigen::MatrixXcd& rho) const;

private:
    Eigen::VectorXd energies_;
    std::vector<JumpTerm> jumps_;
    Eigen::MatrixXcd drive_;
    double amplitude_;
    double frequency_;
    Eigen::VectorXd decay_;
    Eigen::MatrixXd population_rates_;
    double reference_rate_{0.0};
};

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::MatrixXcd> states;
};

// Fixed-step Lawson RK4: the static part is exponentiated exactly, the drive is integrated by
// RK4 in its interaction picture. States are recorded every sample_every steps and at the end.
// Throws std::invalid_argument on a non-physical ρ0 and IntegrationError on trace drift.
Trajectory evolve(const Eigen::MatrixXcd& rho0, const LindbladGenerator& gen, double t0, double t1, double dt,
                  std::size_t sample_every = 1);

struct FloquetOptions {
    int steps_per_period{64};   // multiple of phase_samples
    int phase_samples{8};
    double stroboscopic_tol{1e-7};
    std::optional<double> transient_cap; // default 200 / min κ
    double truncation_guard{1e-4};       // top ⌈M/10⌉ populations must stay below this
};

struct PeriodicState {
    double period{0.0};
    std::vector<double> phase_times;
    std::vector<Eigen::MatrixXcd> rho;
    int periods_to_converge{0};
    double final_change{0.0};
    double top_population{0.0};
};

class TruncationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Stroboscopic steady state from the ground state, sampled at phase_samples phases of one period.
PeriodicState steady_periodic_state(const LindbladGenerator& gen, const FloquetOptions& opts = {});

struct Peak {
    double frequency;
    double height;
    std::optional<std::size_t> transition; // index into FluorescenceSpectrum::lines
    std::string assignment;                // "Psi2+->Psi0-" or "unassigned"
};

// A candidate emission line: dressed transition, its emission weight and Lorentzian width.
struct EmissionLine {
    std::size_t lower;
    std::size_t upper;
    double frequency;
    double element;
    double weight;    // steady upper-level population × |⟨lower|X|upper⟩|²
    double linewidth; // FWHM, Γ_lower + Γ_upper + 2η
    std::string label;
};

struct FluorescenceSpectrum {
    std::vector<double> omega_grid;
    std::vector<double> s_values;
    std::vector<Peak> peaks;
    std::vector<EmissionLine> lines;
    double window{0.0};                     // η
    double tau_max{0.0};
    std::vector<std::complex<double>> g0;   // g(t_s, t_s) per phase
    double tail_ratio{0.0};                 // max_s |g(t_s, t_s + τ_max)| / |g(t_s, t_s)|
    bool tau_max_warning{false};
};

struct FluorescenceOptions {
    double line_weight_floor{1e-8}; // relative to the strongest line, for peak assignment
    double peak_threshold{0.05};    // relative height for the peaks stored on the result
};

// Quantum-regression spectrum S(ω) = 2 Re ∫₀^τmax e^{iωτ − ητ} g(t_s, t_s + τ) dτ averaged over the
// phase samples, η = 3/τ_max. x_out is given in the dressed basis of the generator.
FluorescenceSpectrum fluorescence(const LindbladGenerator& gen, const PeriodicState& state,
                                  const Eigen::MatrixXcd& x_out, const std::vector<std::string>& level_labels,
                                  const std::vector<double>& omega_grid, double tau_max,
                                  const FluorescenceOptions& opts = {}, const FloquetOptions& floquet = {});

// V† X V restricted to the first m retained levels.
Eigen::MatrixXcd dressed_block(const EigenDecomposition& eigs, const SparseOperator& x, std::size_t m);

// Convenience form: computes the periodic state and the dressed output operator first.
FluorescenceSpectrum fluorescence(const EigenDecomposition& eigs, const LindbladGenerator& gen,
                                  const SparseOperator& x_out, const std::vector<double>& omega_grid, double tau_max,
                                  const FluorescenceOptions& opts = {}, const FloquetOptions& floquet = {});

struct PeakSummary {
    std::vector<Peak> peaks;
    double centroid{0.0}; // mean peak frequency
    double spread{0.0};   // max − min peak frequency
};

// Local maxima above rel_threshold·max S, refined by a parabola through the three top samples,
// and assigned to the nearest candidate line within 3 linewidths.
PeakSummary extract_peaks(const FluorescenceSpectrum& spectrum, double rel_threshold);

} // namespace twophoton
