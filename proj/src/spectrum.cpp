// spectrum.cpp: Parity-resolved diagonalization, cutoff control, coupling sweeps and collapse diagnostics

#include "twophoton/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "twophoton/eigensolver.hpp"

namespace twophoton {

namespace {

using Triplet = Eigen::Triplet<Complex, std::int64_t>;

// Basis indices of one photon-parity block, photon-number major so that the block is
// banded with half-bandwidth below 2·2^N.
std::vector<std::int64_t> parity_block_indices(const HilbertSpace& space, int parity) {
    std::vector<std::int64_t> idx;
    for (int n = parity > 0 ? 0 : 1; n <= space.n_max(); n += 2)
        for (std::size_t s = 0; s < space.spin_dim(); ++s)
            idx.push_back(static_cast<std::int64_t>(space.index(s, n)));
    return idx;
}

SparseMatrix extract_block(const SparseMatrix& h, const std::vector<std::int64_t>& idx) {
    std::vector<std::int64_t> position(static_cast<std::size_t>(h.rows()), -1);
    for (std::size_t i = 0; i < idx.size(); ++i)
        position[static_cast<std::size_t>(idx[i])] = static_cast<std::int64_t>(i);
    std::vector<Triplet> t;
    for (std::int64_t c = 0; c < h.outerSize(); ++c) {
        const std::int64_t pc = position[static_cast<std::size_t>(c)];
        if (pc < 0)
            continue;
        for (SparseMatrix::InnerIterator it(h, c); it; ++it) {
            const std::int64_t pr = position[static_cast<std::size_t>(it.row())];
            if (pr >= 0)
                t.emplace_back(pr, pc, it.value());
        }
    }
    const auto d = static_cast<std::int64_t>(idx.size());
    SparseMatrix b(d, d);
    b.setFromTriplets(t.begin(), t.end());
    b.makeCompressed();
    return b;
}

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)); }

} // namespace

bool EigenDecomposition::all_converged() const {
    return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

std::optional<std::size_t> EigenDecomposition::index_of(int parity, std::size_t rank) const {
    for (std::size_t i = 0; i < size(); ++i)
        if (parities[i] == parity && ranks[i] == rank)
            return i;
    return std::nullopt;
}

std::string EigenDecomposition::label(std::size_t i) const {
    return "Psi" + std::to_string(ranks.at(i)) + (parities.at(i) > 0 ? "+" : "-");
}

EigenDecomposition diagonalize(const SparseOperator& h, const HilbertSpace& space, std::size_t k_levels) {
    if (h.dimension() != space.dimension())
        throw std::invalid_argument("diagonalize: operator dimension does not match the space");
    const double scale = h.max_abs_entry();
    if (commutator(h, photon_parity(space)).max_abs_entry() > 1e-12 * scale)
        throw std::invalid_argument("diagonalize: Hamiltonian does not conserve photon parity");
    if (k_levels > space.dimension())
        throw std::invalid_argument("diagonalize: " + std::to_string(k_levels) + " levels requested from a " +
                                    std::to_string(space.dimension()) + "-dimensional space");

    struct Candidate {
        double energy;
        int parity;
        std::size_t rank;
        Eigen::VectorXcd vector;
    };
    std::vector<Candidate> all;
    for (int parity : {+1, -1}) {
        const auto idx = parity_block_indices(space, parity);
        if (idx.empty())
            continue;
        const std::size_t take = std::min(k_levels, idx.size());
        const auto pairs = linalg::lowest_eigenpairs(extract_block(h.matrix(), idx), take);
        for (std::size_t r = 0; r < take; ++r) {
            Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
            for (std::size_t i = 0; i < idx.size(); ++i)
                v(idx[i]) = pairs.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r));
            all.push_back({pairs.values(static_cast<Eigen::Index>(r)), parity, r, std::move(v)});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
        if (nearly_equal(a.energy, b.energy))
            return a.parity > b.parity;
        return a.energy < b.energy;
    });
    all.resize(k_levels);

    EigenDecomposition out;
    out.space = space;
    out.n_max_used = space.n_max();
    out.energies.resize(static_cast<Eigen::Index>(k_levels));
    out.states.resize(static_cast<Eigen::Index>(space.dimension()), static_cast<Eigen::Index>(k_levels));
    for (std::size_t i = 0; i < k_levels; ++i) {
        out.energies(static_cast<Eigen::Index>(i)) = all[i].energy;
        out.states.col(static_cast<Eigen::Index>(i)) = all[i].vector;
        out.parities.push_back(all[i].parity);
        out.ranks.push_back(all[i].rank);
    }
    out.converged.assign(k_levels, true);
    out.cutoff_history = {space.n_max()};
    return out;
}

NonConvergent::NonConvergent(double g, std::vector<CutoffStep> history, std::vector<bool> level_converged)
    : std::runtime_error("spectrum did not converge at g2 = " + std::to_string(g) + " up to n_max = " +
                         (history.empty() ? std::string("?") : std::to_string(history.back().n_max))),
      g_(g), history_(std::move(history)), level_converged_(std::move(level_converged)) {}

EigenDecomposition converge_spectrum(const ModelParams& params, std::size_t k_levels, const ConvergenceOptions& opts) {
    params.validate();
    if (!(opts.rel_tol > 0.0))
        throw std::invalid_argument("converge_spectrum: rel_tol must be > 0");
    if (opts.n_max_start < 1 || opts.n_max_cap < opts.n_max_start)
        throw std::invalid_argument("converge_spectrum: bad cutoff range");

    std::vector<CutoffStep> history;
    std::optional<EigenDecomposition> previous;
    std::vector<bool> flags;
    for (int n_max = opts.n_max_start;; n_max = std::min(2 * n_max, opts.n_max_cap)) {
        const HilbertSpace space(params.n_qubits, n_max);
        EigenDecomposition current = diagonalize(build_hamiltonian(params, space), space, k_levels);
        history.push_back({n_max, current.energies});
        if (previous) {
            flags.assign(k_levels, false);
            for (std::size_t i = 0; i < k_levels; ++i) {
                const auto e = static_cast<Eigen::Index>(i);
                flags[i] = std::abs(current.energies(e) - previous->energies(e)) < opts.rel_tol * params.omega_c;
            }
            if (std::all_of(flags.begin(), flags.end(), [](bool f) { return f; })) {
                previous->converged = flags;
                previous->cutoff_history.clear();
                for (const auto& step : history)
                    previous->cutoff_history.push_back(step.n_max);
                return std::move(*previous);
            }
        }
        if (n_max >= opts.n_max_cap)
            throw NonConvergent(params.g2, std::move(history), std::move(flags));
        previous = std::move(current);
    }
}

std::vector<std::size_t> match_states(const EigenDecomposition& from, const EigenDecomposition& to,
                                      std::vector<double>* overlaps) {
    if (from.size() != to.size() || from.space.n_qubits() != to.space.n_qubits())
        throw std::invalid_argument("match_states: incompatible decompositions");
    const int common = std::min(from.space.n_max(), to.space.n_max());
    const std::size_t k = from.size();

    auto restrict = [common](const EigenDecomposition& d) {
        const HilbertSpace small(d.space.n_qubits(), common);
        Eigen::MatrixXcd r(static_cast<Eigen::Index>(small.dimension()), d.states.cols());
        for (std::size_t s = 0; s < small.spin_dim(); ++s)
            for (int n = 0; n <= common; ++n)
                r.row(static_cast<Eigen::Index>(small.index(s, n))) =
                    d.states.row(static_cast<Eigen::Index>(d.space.index(s, n)));
        return r;
    };
    const Eigen::MatrixXd o = (restrict(from).adjoint() * restrict(to)).cwiseAbs();

    std::vector<std::size_t> map(k, 0);
    std::vector<double> best(k, 0.0);
    std::vector<bool> used_a(k, false), used_b(k, false);
    for (std::size_t step = 0; step < k; ++step) {
        double top = -1.0;
        std::size_t ta = 0, tb = 0;
        for (std::size_t a = 0; a < k; ++a) {
            if (used_a[a])
                continue;
            for (std::size_t b = 0; b < k; ++b)
                if (!used_b[b] && o(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) > top) {
                    top = o(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                    ta = a;
                    tb = b;
                }
        }
        used_a[ta] = used_b[tb] = true;
        map[ta] = tb;
        best[ta] = top;
    }
    if (overlaps)
        *overlaps = std::move(best);
    return map;
}

SweepResult sweep_coupling(const ModelParams& params, const std::vector<double>& g_grid, std::size_t k_levels,
                           const ConvergenceOptions& opts) {
    params.validate();
    if (g_grid.empty())
        throw std::invalid_argument("sweep_coupling: empty grid");
    const double g_col = collapse_coupling(params).value;
    for (std::size_t i = 0; i < g_grid.size(); ++i) {
        if (i > 0 && !(g_grid[i] > g_grid[i - 1]))
            throw std::invalid_argument("sweep_coupling: grid must be strictly increasing");
        if (!(g_grid[i] >= 0.0 && g_grid[i] < g_col))
            throw std::invalid_argument("sweep_coupling: grid value " + std::to_string(g_grid[i]) +
                                        " outside [0, g_col)");
    }

    SweepResult out;
    out.g_values = g_grid;
    std::optional<EigenDecomposition> previous;
    for (double g : g_grid) {
        ModelParams p = params;
        p.g2 = g;
        EigenDecomposition eigs = converge_spectrum(p, k_levels, opts);
        std::vector<SweepLevel> column;
        for (std::size_t i = 0; i < eigs.size(); ++i)
            column.push_back({eigs.energies(static_cast<Eigen::Index>(i)), eigs.parities[i]});
        out.levels.push_back(std::move(column));
        out.n_max_used.push_back(eigs.n_max_used);
        if (previous) {
            std::vector<double> ov;
            out.continuity_map.push_back(match_states(*previous, eigs, &ov));
            out.continuity_overlap.push_back(std::move(ov));
        }
        previous = std::move(eigs);
    }
    return out;
}

std::string to_string(CollapseMethod method) {
    return method == CollapseMethod::SpacingExtrapolation ? "spacing-extrapolation" : "convergence-failure";
}

CollapseDiagnostics estimate_collapse(const ModelParams& params, const CollapseOptions& opts) {
    params.validate();
    if (opts.k_levels < opts.band_first + 2)
        throw std::invalid_argument("estimate_collapse: band needs at least two levels");
    const auto analytic = collapse_coupling(params);

    CollapseDiagnostics out;
    out.g_col_analytic = analytic.value;
    out.form_dependent = analytic.form_dependent;

    // Outcome per coupling: converged spectrum or the flags of the failed run.
    struct Outcome {
        std::optional<EigenDecomposition> eigs;
        std::vector<bool> flags;
    };
    std::map<double, Outcome> cache;
    auto probe = [&](double g) -> const Outcome& {
        auto it = cache.find(g);
        if (it != cache.end())
            return it->second;
        ModelParams p = params;
        p.g2 = g;
        Outcome o;
        try {
            o.eigs = converge_spectrum(p, opts.k_levels, opts.convergence);
        } catch (const NonConvergent& e) {
            o.flags = e.level_converged();
        }
        return cache.emplace(g, std::move(o)).first->second;
    };

    const auto first = static_cast<Eigen::Index>(opts.band_first);
    const auto last = static_cast<Eigen::Index>(opts.k_levels - 1);
    for (double f : opts.spacing_fractions) {
        const double g = f * analytic.value;
        const Outcome& o = probe(g);
        if (o.eigs)
            out.spacing_curve.push_back({g, (o.eigs->energies(last) - o.eigs->energies(first)) / double(last - first)});
    }

    // spacing² is linear in g near the collapse for a Bogoliubov ladder.
    std::vector<SpacingSample> fit;
    for (const auto& s : out.spacing_curve)
        if (s.g >= opts.fit_from_fraction * analytic.value * (1.0 - 1e-12) && s.spacing > 0.0)
            fit.push_back(s);
    if (fit.size() < 4)
        throw CollapseFitError("collapse fit needs at least 4 converged spacing samples, got " +
                               std::to_string(fit.size()));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& s : fit) {
        const double y = s.spacing * s.spacing;
        sx += s.g;
        sy += y;
        sxx += s.g * s.g;
        sxy += s.g * y;
    }
    const double m = double(fit.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / m;
    if (!(slope < 0.0))
        throw CollapseFitError("collapse fit: level spacing does not shrink with g");
    out.g_col_fit = -intercept / slope;

    std::optional<double> lo, hi;
    for (const auto& s : out.spacing_curve)
        lo = s.g;
    for (double f : opts.scan_fractions) {
        const double g = f * analytic.value;
        if (probe(g).eigs) {
            lo = g;
        } else {
            hi = g;
            break;
        }
    }
    if (hi) {
        const double lower = lo.value_or(0.0);
        double a = lower, b = *hi;
        while (b - a > opts.bisection_resolution * analytic.value) {
            const double mid = 0.5 * (a + b);
            (probe(mid).eigs ? a : b) = mid;
        }
        out.smallest_failing_g = b;
        if (lo)
            out.largest_converged_g = a;
        out.g_col_estimated = b;
        out.method = CollapseMethod::ConvergenceFailure;
    } else {
        out.g_col_estimated = out.g_col_fit;
        out.method = CollapseMethod::SpacingExtrapolation;
    }

    const Outcome& at_col = probe(analytic.value);
    out.discrete_levels_observed =
        at_col.eigs ? opts.k_levels
                    : static_cast<std::size_t>(std::count(at_col.flags.begin(), at_col.flags.end(), true));
    return out;
}

Eigen::MatrixXcd dressed_matrix(const EigenDecomposition& eigs, const SparseOperator& x) {
    if (x.dimension() != eigs.space.dimension())
        throw std::invalid_argument("dressed_matrix: operator dimension does not match the decomposition");
    const Eigen::MatrixXcd xv = x.matrix() * eigs.states;
    return eigs.states.adjoint() * xv;
}

std::vector<Transition> transition_table(const EigenDecomposition& eigs, const SparseOperator& x) {
    if (!eigs.all_converged())
        throw std::invalid_argument("transition_table: decomposition has unconverged levels");
    const Eigen::MatrixXcd xd = dressed_matrix(eigs, x);
    std::vector<Transition> out;
    for (std::size_t j = 0; j < eigs.size(); ++j)
        for (std::size_t k = j + 1; k < eigs.size(); ++k) {
            const auto jj = static_cast<Eigen::Index>(j), kk = static_cast<Eigen::Index>(k);
            out.push_back({j, k, eigs.energies(kk) - eigs.energies(jj), std::abs(xd(jj, kk))});
        }
    std::stable_sort(out.begin(), out.end(),
                     [](const Transition& a, const Transition& b) { return a.frequency < b.frequency; });
    return out;
}

} // namespace twophoton
