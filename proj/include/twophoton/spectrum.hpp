// spectrum.hpp: Parity-resolved diagonalization, cutoff control, coupling sweeps and collapse diagnostics

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twophoton/model.hpp"
#include "twophoton/operators.hpp"

namespace twophoton {

// Lowest levels of a parity-symmetric Hamiltonian, merged from both photon-parity blocks.
struct EigenDecomposition {
    HilbertSpace space{1, 0};
    Eigen::VectorXd energies;       // ascending
    Eigen::MatrixXcd states;        // columns in the full space
    std::vector<int> parities;      // +1 or −1 per level
    std::vector<std::size_t> ranks; // position within its own parity block
    std::vector<bool> converged;
    int n_max_used{0};
    std::vector<int> cutoff_history;

    std::size_t size() const { return parities.size(); }
    bool all_converged() const;
    // Index of |Ψ_rank^parity⟩ among the retained levels, if retained.
    std::optional<std::size_t> index_of(int parity, std::size_t rank) const;
    // "Psi2+" style label of level i.
    std::string label(std::size_t i) const;
};

// Requires [H, P] = 0 to 1e−12·max|H|. Ties in energy list parity +1 first.
// Every returned level is marked converged: cutoff control lives in converge_spectrum.
EigenDecomposition diagonalize(const SparseOperator& h, const HilbertSpace& space, std::size_t k_levels);

struct ConvergenceOptions {
    int n_max_start{64};
    int n_max_cap{4096};
    double rel_tol{1e-8}; // per-level change allowed between cutoffs, in units of ω_c
};

struct CutoffStep {
    int n_max;
    Eigen::VectorXd energies;
};

class NonConvergent : public std::runtime_error {
public:
    NonConvergent(double g, std::vector<CutoffStep> history, std::vector<bool> level_converged);

    double g() const { return g_; }
    const std::vector<CutoffStep>& history() const { return history_; }
    const std::vector<bool>& level_converged() const { return level_converged_; }

private:
    double g_;
    std::vector<CutoffStep> history_;
    std::vector<bool> level_converged_;
};

// Doubles n_max until every one of the lowest k_levels moves by less than rel_tol·ω_c.
// The result is the smaller of the two agreeing cutoffs; NonConvergent is thrown at the cap.
EigenDecomposition converge_spectrum(const ModelParams& params, std::size_t k_levels,
                                     const ConvergenceOptions& opts = {});

struct SweepLevel {
    double energy;
    int parity;
};

struct SweepResult {
    std::vector<double> g_values;
    std::vector<std::vector<SweepLevel>> levels; // [g index][level]
    std::vector<int> n_max_used;
    // continuity_map[i][a] = level at g_{i+1} continuing level a at g_i. A level pushed out of
    // the top of the window by a crossing pairs with the one entering, at small overlap.
    std::vector<std::vector<std::size_t>> continuity_map;
    std::vector<std::vector<double>> continuity_overlap;
};

// Greedy maximal-overlap bijection between two sets of states, compared on the common
// photon cutoff. Returns map[a] = b.
std::vector<std::size_t> match_states(const EigenDecomposition& from, const EigenDecomposition& to,
                                      std::vector<double>* overlaps = nullptr);

SweepResult sweep_coupling(const ModelParams& params, const std::vector<double>& g_grid, std::size_t k_levels,
                           const ConvergenceOptions& opts = {});

struct SpacingSample {
    double g;
    double spacing;
};

enum class CollapseMethod { SpacingExtrapolation, ConvergenceFailure };
std::string to_string(CollapseMethod method);

struct CollapseOptions {
    std::size_t k_levels{21};     // levels 10…20 form the ladder band
    std::size_t band_first{10};
    std::vector<double> spacing_fractions{0.80, 0.82, 0.84, 0.86, 0.88, 0.90, 0.92, 0.94, 0.96, 0.98};
    double fit_from_fraction{0.88};
    std::vector<double> scan_fractions{0.99, 0.995, 1.0, 1.005, 1.01, 1.02, 1.05, 1.1, 1.2};
    double bisection_resolution{1e-3}; // relative to the analytic value
    ConvergenceOptions convergence{};
};

struct CollapseDiagnostics {
    double g_col_analytic{0.0};
    double g_col_estimated{0.0};
    CollapseMethod method{CollapseMethod::ConvergenceFailure};
    std::vector<SpacingSample> spacing_curve;
    double g_col_fit{0.0};                   // root of spacing² linear in g
    std::optional<double> smallest_failing_g; // convergence failure bracket, upper end
    std::optional<double> largest_converged_g;
    std::size_t discrete_levels_observed{0}; // converged levels at g_col_analytic
    bool form_dependent{false};
};

class CollapseFitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Throws CollapseFitError when fewer than 4 spacing samples are usable for the fit.
CollapseDiagnostics estimate_collapse(const ModelParams& params, const CollapseOptions& opts = {});

struct Transition {
    std::size_t lower;
    std::size_t upper;
    double frequency;
    double element; // |⟨lower|X|upper⟩|
};

// X in the retained eigenbasis: V† X V.
Eigen::MatrixXcd dressed_matrix(const EigenDecomposition& eigs, const SparseOperator& x);

// All pairs lower < upper sorted by frequency. Requires every retained level converged.
std::vector<Transition> transition_table(const EigenDecomposition& eigs, const SparseOperator& x);

} // namespace twophoton
