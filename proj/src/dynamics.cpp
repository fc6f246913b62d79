// dynamics.cpp: Driven-dissipative evolution in the dressed basis and the resulting fluorescence spectrum

#include "twophoton/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace twophoton {

namespace {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using RowMatrixXcd = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr Complex I{0.0, 1.0};

Index idx(std::size_t i) { return static_cast<Index>(i); }

// Lawson RK4 on a horizontal stack of M×M matrices [Y_1 … Y_c]: e^{L0 h} is applied exactly
// (coherences by an elementwise factor, populations by the rate-matrix exponential), the drive
// term by RK4 in the interaction picture.
class LawsonStepper {
public:
    LawsonStepper(const LindbladGenerator& gen, double h) : gen_(gen), h_(h), m_(idx(gen.dimension())) {
        for (int half = 0; half < 2; ++half) {
            const double tau = half == 0 ? 0.5 * h : h;
            MatrixXcd f(m_, m_);
            for (Index a = 0; a < m_; ++a)
                for (Index b = 0; b < m_; ++b) {
                    const double w = gen.energies()(a) - gen.energies()(b);
                    const double decay = 0.5 * (gen.decay_rates()(a) + gen.decay_rates()(b));
                    f(a, b) = std::exp((-I * w - decay) * tau);
                }
            coherence_[half] = f;
            populations_[half] = (gen.population_rates() * tau).exp();
        }
    }

    double h() const { return h_; }

    void step(double t, MatrixXcd& y) {
        if (gen_.amplitude() == 0.0) {
            apply_exp(1, y);
            return;
        }
        const double h = h_;
        drive(t, y, k1_);

        u_ = y + (0.5 * h) * k1_;
        apply_exp(0, u_);
        drive(t + 0.5 * h, u_, k2_);

        ey_half_ = y;
        apply_exp(0, ey_half_);
        u_ = ey_half_ + (0.5 * h) * k2_;
        drive(t + 0.5 * h, u_, k3_);

        ek3_ = k3_;
        apply_exp(0, ek3_);
        u_ = ey_half_;
        apply_exp(0, u_); // e^{L0 h} y
        u_ += h * ek3_;
        drive(t + h, u_, k4_);

        // y ← e^{L0 h}(y + h/6 k1) + h/3 e^{L0 h/2}(k2 + k3) + h/6 k4
        y += (h / 6.0) * k1_;
        apply_exp(1, y);
        k2_ += k3_;
        apply_exp(0, k2_);
        y += (h / 3.0) * k2_ + (h / 6.0) * k4_;
    }

private:
    void apply_exp(int which, MatrixXcd& y) const {
        const Index blocks = y.cols() / m_;
        const MatrixXcd& f = coherence_[which];
        const MatrixXd& p = populations_[which];
        for (Index k = 0; k < blocks; ++k) {
            auto blk = y.middleCols(k * m_, m_);
            const VectorXcd diag = blk.diagonal();
            blk.array() *= f.array();
            blk.diagonal() = p * diag;
        }
    }

    // out = −i Ω cos(ω_d t) [D, y], block by block.
    void drive(double t, const MatrixXcd& y, MatrixXcd& out) const {
        const Complex c = -I * gen_.amplitude() * std::cos(gen_.frequency() * t);
        const MatrixXcd& d = gen_.drive_matrix();
        out.noalias() = d * y;
        const Index blocks = y.cols() / m_;
        for (Index k = 0; k < blocks; ++k)
            out.middleCols(k * m_, m_).noalias() -= y.middleCols(k * m_, m_) * d;
        out *= c;
    }

    const LindbladGenerator& gen_;
    double h_;
    Index m_;
    MatrixXcd coherence_[2];
    MatrixXd populations_[2];
    MatrixXcd k1_, k2_, k3_, k4_, u_, ey_half_, ek3_;
};

// Set of Liouville index pairs (a, b) closed under the generator, grown from seeds.
struct Sector {
    std::vector<std::pair<Index, Index>> pairs;
    MatrixXd lookup; // −1 outside the sector

    std::size_t size() const { return pairs.size(); }
};

Sector liouville_closure(const LindbladGenerator& gen, const std::vector<std::pair<Index, Index>>& seeds) {
    const Index m = idx(gen.dimension());
    const bool driven = gen.amplitude() != 0.0;
    const MatrixXcd& d = gen.drive_matrix();
    const MatrixXd& w = gen.population_rates();
    Sector s;
    s.lookup = MatrixXd::Constant(m, m, -1.0);
    std::vector<std::pair<Index, Index>> queue;
    auto visit = [&](Index a, Index b) {
        if (s.lookup(a, b) >= 0.0)
            return;
        s.lookup(a, b) = double(s.pairs.size());
        s.pairs.emplace_back(a, b);
        queue.emplace_back(a, b);
    };
    for (const auto& [a, b] : seeds)
        visit(a, b);
    while (!queue.empty()) {
        const auto [a, b] = queue.back();
        queue.pop_back();
        if (a == b)
            for (Index j = 0; j < m; ++j)
                if (j != a && w(j, a) != 0.0)
                    visit(j, j);
        if (driven)
            for (Index c = 0; c < m; ++c) {
                if (d(c, a) != Complex(0.0))
                    visit(c, b);
                if (d(b, c) != Complex(0.0))
                    visit(a, c);
            }
    }
    return s;
}

std::vector<std::pair<Index, Index>> nonzero_pattern(const std::vector<MatrixXcd>& mats) {
    std::vector<std::pair<Index, Index>> out;
    const Index m = mats.front().rows();
    for (Index b = 0; b < m; ++b)
        for (Index a = 0; a < m; ++a)
            for (const auto& x : mats)
                if (x(a, b) != Complex(0.0)) {
                    out.emplace_back(a, b);
                    break;
                }
    return out;
}

VectorXcd to_sector(const Sector& s, const MatrixXcd& y) {
    VectorXcd v(idx(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i)
        v(idx(i)) = y(s.pairs[i].first, s.pairs[i].second);
    return v;
}

MatrixXcd from_sector(const Sector& s, const VectorXcd& v, Index m) {
    MatrixXcd y = MatrixXcd::Zero(m, m);
    for (std::size_t i = 0; i < s.size(); ++i)
        y(s.pairs[i].first, s.pairs[i].second) = v(idx(i));
    return y;
}

struct PeriodMap {
    MatrixXcd phi;                 // one-period propagator restricted to the sector
    std::optional<MatrixXcd> left; // left(r, col) = Tr[X⁺ V(t_r, 0) E_col], r = 0…R−1
};

// Propagates every sector basis matrix through one drive period, in column chunks.
PeriodMap build_period_map(const LindbladGenerator& gen, const Sector& sector, int steps, const MatrixXcd* x_plus) {
    const Index m = idx(gen.dimension());
    const Index n = idx(sector.size());
    const double h = gen.period() / steps;
    LawsonStepper stepper(gen, h);
    PeriodMap out;
    out.phi.resize(n, n);
    if (x_plus)
        out.left = MatrixXcd(steps, n);
    const MatrixXcd xt = x_plus ? MatrixXcd(x_plus->transpose()) : MatrixXcd();

    const Index chunk = std::max<Index>(1, std::min<Index>(n, 16384 / std::max<Index>(m, 1)));
    for (Index first = 0; first < n; first += chunk) {
        const Index cols = std::min(chunk, n - first);
        MatrixXcd y = MatrixXcd::Zero(m, m * cols);
        for (Index c = 0; c < cols; ++c) {
            const auto& [a, b] = sector.pairs[std::size_t(first + c)];
            y(a, c * m + b) = 1.0;
        }
        for (int r = 0; r < steps; ++r) {
            if (x_plus)
                for (Index c = 0; c < cols; ++c)
                    (*out.left)(r, first + c) = (xt.array() * y.middleCols(c * m, m).array()).sum();
            stepper.step(r * h, y);
        }
        for (Index c = 0; c < cols; ++c)
            for (Index i = 0; i < n; ++i) {
                const auto& [a, b] = sector.pairs[std::size_t(i)];
                out.phi(i, first + c) = y(a, c * m + b);
            }
    }
    return out;
}

MatrixXcd matrix_power(MatrixXcd base, long long k) {
    MatrixXcd result = MatrixXcd::Identity(base.rows(), base.cols());
    while (k > 0) {
        if (k & 1)
            result = (result * base).eval();
        k >>= 1;
        if (k > 0)
            base = (base * base).eval();
    }
    return result;
}

MatrixXcd lowering_part(const VectorXd& energies, const MatrixXcd& x) {
    MatrixXcd xp = MatrixXcd::Zero(x.rows(), x.cols());
    for (Index j = 0; j < x.rows(); ++j)
        for (Index k = 0; k < x.cols(); ++k)
            if (energies(k) > energies(j))
                xp(j, k) = x(j, k);
    return xp;
}

void check_density_matrix(const MatrixXcd& rho, std::size_t m) {
    if (rho.rows() != idx(m) || rho.cols() != idx(m))
        throw std::invalid_argument("density matrix has the wrong dimension");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("density matrix is not Hermitian");
    if (std::abs(rho.trace() - 1.0) > 1e-10)
        throw std::invalid_argument("density matrix trace is not 1");
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument("density matrix is not positive semidefinite");
}

// Solves (I − z H) u = rhs for upper Hessenberg H (row-major), with adjacent-row pivoting.
VectorXcd hessenberg_solve(const RowMatrixXcd& h, Complex z, VectorXcd rhs, RowMatrixXcd& work) {
    const Index n = h.rows();
    work.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        const Index from = std::max<Index>(0, i - 1);
        work.row(i).segment(from, n - from) = -z * h.row(i).segment(from, n - from);
        work(i, i) += 1.0;
    }
    for (Index k = 0; k + 1 < n; ++k) {
        if (std::abs(work(k + 1, k)) > std::abs(work(k, k))) {
            work.row(k).segment(k, n - k).swap(work.row(k + 1).segment(k, n - k));
            std::swap(rhs(k), rhs(k + 1));
        }
        if (work(k + 1, k) == Complex(0.0))
            continue;
        const Complex f = work(k + 1, k) / work(k, k);
        work.row(k + 1).segment(k + 1, n - k - 1) -= f * work.row(k).segment(k + 1, n - k - 1);
        rhs(k + 1) -= f * rhs(k);
    }
    for (Index i = n - 1; i >= 0; --i) {
        Complex acc = rhs(i);
        if (i + 1 < n)
            acc -= (work.row(i).segment(i + 1, n - i - 1) * rhs.segment(i + 1, n - i - 1)).value();
        rhs(i) = acc / work(i, i);
    }
    return rhs;
}

} // namespace

void DissipationSpec::validate() const {
    if (!(kappa_cavity >= 0.0) || !(kappa_qubit >= 0.0))
        throw std::invalid_argument("dissipation rates must be >= 0");
    if (spectral_exponent != 0 && spectral_exponent != 1)
        throw std::invalid_argument("spectral_exponent must be 0 or 1");
    if (n_dressed < 4)
        throw std::invalid_argument("n_dressed must be >= 4");
}

void DriveSpec::validate() const {
    if (!(amplitude >= 0.0))
        throw std::invalid_argument("drive amplitude must be >= 0");
    if (frequency && !(*frequency > 0.0))
        throw std::invalid_argument("drive frequency must be > 0");
}

double resonant_drive_frequency(const EigenDecomposition& eigs) {
    const auto g0 = eigs.index_of(+1, 0);
    const auto g2 = eigs.index_of(+1, 2);
    if (!g0 || !g2 || !eigs.converged[*g0] || !eigs.converged[*g2])
        throw std::invalid_argument("resonant_drive_frequency: needs three converged even-parity levels");
    return eigs.energies(idx(*g2)) - eigs.energies(idx(*g0));
}

Eigen::MatrixXcd dressed_block(const EigenDecomposition& eigs, const SparseOperator& x, std::size_t m) {
    if (m > eigs.size())
        throw std::invalid_argument("dressed_block: only " + std::to_string(eigs.size()) + " levels retained");
    if (x.dimension() != eigs.space.dimension())
        throw std::invalid_argument("dressed_block: operator dimension does not match the decomposition");
    const auto v = eigs.states.leftCols(idx(m));
    const MatrixXcd xv = x.matrix() * v;
    return v.adjoint() * xv;
}

std::vector<JumpTerm> dressed_jump_operators(const EigenDecomposition& eigs, const SparseOperator& x, double kappa,
                                             int spectral_exponent, std::size_t m_levels, double omega_c) {
    if (!x.is_hermitian())
        throw std::invalid_argument("dressed_jump_operators: coupling operator must be Hermitian");
    if (m_levels > eigs.size() ||
        !std::all_of(eigs.converged.begin(), eigs.converged.begin() + static_cast<long>(m_levels),
                     [](bool c) { return c; }))
        throw std::invalid_argument("dressed_jump_operators: fewer than " + std::to_string(m_levels) +
                                    " converged levels");
    const MatrixXcd xd = dressed_block(eigs, x, m_levels);
    std::vector<JumpTerm> out;
    for (std::size_t k = 0; k < m_levels; ++k)
        for (std::size_t j = 0; j < m_levels; ++j) {
            const double w = eigs.energies(idx(k)) - eigs.energies(idx(j));
            if (!(w > 0.0))
                continue;
            const double rate = kappa * std::pow(w / omega_c, spectral_exponent) * std::norm(xd(idx(j), idx(k)));
            if (rate > 0.0 && rate >= 1e-14 * kappa)
                out.push_back({j, k, rate});
        }
    return out;
}

LindbladGenerator::LindbladGenerator(Eigen::VectorXd energies, std::vector<JumpTerm> jumps,
                                     Eigen::MatrixXcd drive_matrix, double amplitude, double frequency)
    : energies_(std::move(energies)), jumps_(std::move(jumps)), drive_(std::move(drive_matrix)),
      amplitude_(amplitude), frequency_(frequency) {
    const Index m = energies_.size();
    if (m < 1)
        throw std::invalid_argument("LindbladGenerator: no levels");
    if (drive_.rows() != m || drive_.cols() != m)
        throw std::invalid_argument("LindbladGenerator: drive matrix has the wrong dimension");
    if ((drive_ - drive_.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, drive_.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("LindbladGenerator: drive matrix is not Hermitian");
    if (!(amplitude_ >= 0.0) || !(frequency_ > 0.0))
        throw std::invalid_argument("LindbladGenerator: need amplitude >= 0 and frequency > 0");
    drive_ = (0.5 * (drive_ + drive_.adjoint())).eval();

    decay_ = VectorXd::Zero(m);
    population_rates_ = MatrixXd::Zero(m, m);
    reference_rate_ = std::numeric_limits<double>::infinity();
    for (const auto& t : jumps_) {
        if (t.lower >= std::size_t(m) || t.upper >= std::size_t(m))
            throw std::invalid_argument("LindbladGenerator: jump term outside the retained levels");
        if (!(energies_(idx(t.upper)) > energies_(idx(t.lower))) || !(t.rate >= 0.0))
            throw std::invalid_argument("LindbladGenerator: jump terms must lower the energy with rate >= 0");
        decay_(idx(t.upper)) += t.rate;
        population_rates_(idx(t.lower), idx(t.upper)) += t.rate;
        population_rates_(idx(t.upper), idx(t.upper)) -= t.rate;
        if (t.rate > 0.0)
            reference_rate_ = std::min(reference_rate_, t.rate);
    }
    if (!std::isfinite(reference_rate_))
        reference_rate_ = 0.0;
}

LindbladGenerator LindbladGenerator::build(const EigenDecomposition& eigs, const ModelParams& params,
                                           const DissipationSpec& dissipation, const DriveSpec& drive) {
    dissipation.validate();
    drive.validate();
    const std::size_t m = dissipation.n_dressed;
    if (m > eigs.size())
        throw std::invalid_argument("n_dressed = " + std::to_string(m) + " exceeds the " +
                                    std::to_string(eigs.size()) + " retained levels");

    std::vector<std::pair<double, SparseOperator>> channels;
    channels.emplace_back(dissipation.kappa_cavity, field(eigs.space));
    for (int q = 1; q <= eigs.space.n_qubits(); ++q)
        channels.emplace_back(dissipation.kappa_qubit, pauli(eigs.space, q, PauliAxis::X));

    MatrixXd rates = MatrixXd::Zero(idx(m), idx(m));
    for (const auto& [kappa, op] : channels)
        for (const auto& t : dressed_jump_operators(eigs, op, kappa, dissipation.spectral_exponent, m, params.omega_c))
            rates(idx(t.lower), idx(t.upper)) += t.rate;
    std::vector<JumpTerm> jumps;
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t j = 0; j < m; ++j)
            if (rates(idx(j), idx(k)) > 0.0)
                jumps.push_back({j, k, rates(idx(j), idx(k))});

    const double frequency = drive.frequency ? *drive.frequency : resonant_drive_frequency(eigs);
    LindbladGenerator gen(eigs.energies.head(idx(m)), std::move(jumps),
                          dressed_block(eigs, build_drive_operator(eigs.space, drive.target), m), drive.amplitude,
                          frequency);
    double kappa_min = std::numeric_limits<double>::infinity();
    for (double k : {dissipation.kappa_cavity, dissipation.kappa_qubit})
        if (k > 0.0)
            kappa_min = std::min(kappa_min, k);
    if (std::isfinite(kappa_min))
        gen.set_reference_rate(kappa_min);
    return gen;
}

double LindbladGenerator::period() const { return 2.0 * std::numbers::pi / frequency_; }

Eigen::MatrixXcd LindbladGenerator::apply_static(const Eigen::MatrixXcd& rho) const {
    const Index m = energies_.size();
    MatrixXcd out(m, m);
    for (Index b = 0; b < m; ++b)
        for (Index a = 0; a < m; ++a)
            out(a, b) = (-I * (energies_(a) - energies_(b)) - 0.5 * (decay_(a) + decay_(b))) * rho(a, b);
    out.diagonal() = population_rates_ * rho.diagonal();
    return out;
}

Eigen::MatrixXcd LindbladGenerator::apply_drive(const Eigen::MatrixXcd& rho) const {
    return -I * (drive_ * rho - rho * drive_);
}

Eigen::MatrixXcd LindbladGenerator::apply(double t, const Eigen::MatrixXcd& rho) const {
    return apply_static(rho) + amplitude_ * std::cos(frequency_ * t) * apply_drive(rho);
}

Trajectory evolve(const Eigen::MatrixXcd& rho0, const LindbladGenerator& gen, double t0, double t1, double dt,
                  std::size_t sample_every) {
    check_density_matrix(rho0, gen.dimension());
    if (!(dt > 0.0) || !(t1 >= t0))
        throw std::invalid_argument("evolve: need dt > 0 and t1 >= t0");
    if (sample_every == 0)
        sample_every = 1;
    const auto steps = static_cast<long long>(std::ceil((t1 - t0) / dt - 1e-9));
    const double h = steps > 0 ? (t1 - t0) / double(steps) : dt;

    LawsonStepper stepper(gen, h);
    Trajectory out;
    MatrixXcd y = rho0;
    out.times.push_back(t0);
    out.states.push_back(y);
    for (long long s = 1; s <= steps; ++s) {
        const double t = t0 + double(s - 1) * h;
        stepper.step(t, y);
        const double elapsed = double(s) * h;
        const double drift = std::abs(y.trace() - 1.0);
        if (!std::isfinite(drift) || drift > 1e-8 * elapsed + 1e-12)
            throw IntegrationError("evolve: trace drift " + std::to_string(drift) + " after t = " +
                                   std::to_string(elapsed) + " with step " + std::to_string(h) +
                                   "; reduce the step");
        if (s % static_cast<long long>(sample_every) == 0 || s == steps) {
            out.times.push_back(t0 + elapsed);
            out.states.push_back(y);
        }
    }
    return out;
}

PeriodicState steady_periodic_state(const LindbladGenerator& gen, const FloquetOptions& opts) {
    if (opts.phase_samples < 1 || opts.steps_per_period < opts.phase_samples ||
        opts.steps_per_period % opts.phase_samples != 0)
        throw std::invalid_argument("steps_per_period must be a positive multiple of phase_samples");
    const Index m = idx(gen.dimension());
    const double period = gen.period();
    const double h = period / opts.steps_per_period;
    double cap = opts.transient_cap.value_or(gen.reference_rate() > 0.0 ? 200.0 / gen.reference_rate()
                                                                         : std::numeric_limits<double>::infinity());
    const double max_periods = std::min(cap / period, 1e12);

    const Sector sector = liouville_closure(gen, {{0, 0}});
    const PeriodMap map = build_period_map(gen, sector, opts.steps_per_period, nullptr);

    VectorXcd v = VectorXcd::Zero(idx(sector.size()));
    v(idx(std::size_t(sector.lookup(0, 0)))) = 1.0;

    // Stroboscopic evolution; jumps of 2^j periods once a single period is not yet converged.
    PeriodicState out;
    out.period = period;
    MatrixXcd jump = map.phi;
    double periods = 0.0, stride = 1.0;
    for (;;) {
        const VectorXcd next = map.phi * v;
        out.final_change = (next - v).cwiseAbs().sum();
        periods += 1.0;
        v = next;
        if (out.final_change < opts.stroboscopic_tol)
            break;
        if (periods + stride > max_periods)
            throw IntegrationError("no stroboscopic convergence within the transient cap of " + std::to_string(cap) +
                                   " (last change " + std::to_string(out.final_change) + ")");
        v = jump * v;
        periods += stride;
        jump = (jump * jump).eval();
        stride *= 2.0;
    }
    out.periods_to_converge = static_cast<int>(std::min(periods, 2e9));

    LawsonStepper stepper(gen, h);
    MatrixXcd y = from_sector(sector, v, m);
    y /= y.trace();
    const int every = opts.steps_per_period / opts.phase_samples;
    for (int r = 0; r < opts.steps_per_period; ++r) {
        if (r % every == 0) {
            out.phase_times.push_back(r * h);
            out.rho.push_back(0.5 * (y + y.adjoint()));
        }
        stepper.step(r * h, y);
    }

    const Index top = (m + 9) / 10;
    for (const auto& rho : out.rho)
        for (Index i = m - top; i < m; ++i)
            out.top_population = std::max(out.top_population, rho(i, i).real());
    if (out.top_population > opts.truncation_guard)
        throw TruncationError("population " + std::to_string(out.top_population) + " in the top " +
                              std::to_string(top) + " dressed states exceeds " + std::to_string(opts.truncation_guard) +
                              "; increase M");
    return out;
}

FluorescenceSpectrum fluorescence(const LindbladGenerator& gen, const PeriodicState& state,
                                  const Eigen::MatrixXcd& x_out, const std::vector<std::string>& level_labels,
                                  const std::vector<double>& omega_grid, double tau_max,
                                  const FluorescenceOptions& opts, const FloquetOptions& floquet) {
    const Index m = idx(gen.dimension());
    if (x_out.rows() != m || x_out.cols() != m)
        throw std::invalid_argument("fluorescence: output operator has the wrong dimension");
    if (state.rho.empty())
        throw std::invalid_argument("fluorescence: no periodic state");
    if (!(tau_max > 0.0))
        throw std::invalid_argument("fluorescence: tau_max must be > 0");
    if (omega_grid.empty())
        throw std::invalid_argument("fluorescence: empty frequency grid");
    const int steps = floquet.steps_per_period;
    const int phases = int(state.rho.size());
    if (steps % phases != 0)
        throw std::invalid_argument("fluorescence: steps_per_period must be a multiple of the phase count");
    const double period = gen.period();
    const double h = period / steps;
    const double eta = 3.0 / tau_max;
    const long long k_periods = std::max<long long>(1, static_cast<long long>(std::floor(tau_max / period)));

    const MatrixXcd x_plus = lowering_part(gen.energies(), x_out);
    const MatrixXcd x_minus = x_plus.adjoint();

    std::vector<MatrixXcd> seeds_y;
    for (const auto& rho : state.rho)
        seeds_y.push_back(rho * x_minus);

    FluorescenceSpectrum out;
    out.omega_grid = omega_grid;
    out.window = eta;
    out.tau_max = tau_max;

    // Regression heads: g over the rest of the starting period, then the state at t = T.
    LawsonStepper stepper(gen, h);
    const MatrixXcd xt = x_plus.transpose();
    std::vector<int> start(static_cast<std::size_t>(phases));
    std::vector<std::vector<Complex>> heads(static_cast<std::size_t>(phases));
    std::vector<MatrixXcd> z_state(static_cast<std::size_t>(phases));
    for (int s = 0; s < phases; ++s) {
        start[std::size_t(s)] = s * steps / phases;
        MatrixXcd y = seeds_y[std::size_t(s)];
        for (int r = start[std::size_t(s)]; r < steps; ++r) {
            heads[std::size_t(s)].push_back((xt.array() * y.array()).sum());
            stepper.step(r * h, y);
        }
        z_state[std::size_t(s)] = y;
        out.g0.push_back(heads[std::size_t(s)].front());
    }

    std::vector<MatrixXcd> seed_patterns = seeds_y;
    seed_patterns.insert(seed_patterns.end(), z_state.begin(), z_state.end());
    const auto seeds = nonzero_pattern(seed_patterns);
    const Sector sector = seeds.empty() ? Sector{} : liouville_closure(gen, seeds);
    const Index n = idx(sector.size());

    std::vector<double> s_values(omega_grid.size(), 0.0);
    if (n > 0) {
        const PeriodMap map = build_period_map(gen, sector, steps, &x_plus);
        MatrixXcd z(n, phases);
        for (int s = 0; s < phases; ++s)
            z.col(s) = to_sector(sector, z_state[std::size_t(s)]);
        const MatrixXcd zk = matrix_power(map.phi, k_periods) * z;

        for (int s = 0; s < phases; ++s) {
            const Complex g_end = map.left->row(0) * zk.col(s);
            const double g_start = std::abs(out.g0[std::size_t(s)]);
            if (g_start > 0.0)
                out.tail_ratio = std::max(out.tail_ratio, std::abs(g_end) / g_start);
        }

        Eigen::HessenbergDecomposition<MatrixXcd> hess(map.phi);
        const RowMatrixXcd hmat = hess.matrixH();
        const MatrixXcd q = hess.matrixQ();
        const MatrixXcd qz = q.adjoint() * z;
        const MatrixXcd qzk = q.adjoint() * zk;
        const MatrixXcd wq = (*map.left) * q;
        RowMatrixXcd work;

        for (std::size_t i = 0; i < omega_grid.size(); ++i) {
            const Complex rate(-eta, omega_grid[i]);
            const Complex zc = std::exp(rate * period);
            const Complex zck = std::exp(rate * period * double(k_periods));
            Complex total = 0.0;
            VectorXcd rhs = VectorXcd::Zero(n);
            for (int s = 0; s < phases; ++s) {
                const auto& head = heads[std::size_t(s)];
                Complex acc = 0.0;
                for (std::size_t r = 0; r < head.size(); ++r)
                    acc += (r == 0 ? 0.5 : 1.0) * std::exp(rate * (double(r) * h)) * head[r];
                total += h * acc;
                const Complex c = h * std::exp(rate * (double(head.size()) * h));
                rhs += c * (qz.col(s) - zck * qzk.col(s));
            }
            const VectorXcd u = hessenberg_solve(hmat, zc, rhs, work);
            VectorXcd l = VectorXcd::Zero(n);
            for (int r = 0; r < steps; ++r)
                l += std::exp(rate * (double(r) * h)) * wq.row(r).transpose();
            total += (l.transpose() * u).value();
            s_values[i] = 2.0 * total.real() / phases;
        }
    } else {
        for (std::size_t i = 0; i < omega_grid.size(); ++i) {
            Complex total = 0.0;
            for (int s = 0; s < phases; ++s) {
                const auto& head = heads[std::size_t(s)];
                for (std::size_t r = 0; r < head.size(); ++r)
                    total += (r == 0 ? 0.5 : 1.0) * h * std::exp(Complex(-eta, omega_grid[i]) * (double(r) * h)) *
                             head[r];
            }
            s_values[i] = 2.0 * total.real() / phases;
        }
    }
    const double top = *std::max_element(s_values.begin(), s_values.end());
    const double floor = -1e-9 * std::max(top, 0.0);
    for (double& v : s_values)
        v = std::max(v, floor);
    out.s_values = std::move(s_values);
    out.tau_max_warning = out.tail_ratio >= 1e-3;

    // Candidate lines for assignment: downward transitions weighted by steady emission.
    VectorXd pops = VectorXd::Zero(m);
    for (const auto& rho : state.rho)
        pops += rho.diagonal().real() / double(state.rho.size());
    double max_weight = 0.0;
    for (Index k = 0; k < m; ++k)
        for (Index j = 0; j < m; ++j)
            if (x_plus(j, k) != Complex(0.0)) {
                const double weight = std::max(pops(k), 0.0) * std::norm(x_plus(j, k));
                max_weight = std::max(max_weight, weight);
                out.lines.push_back({std::size_t(j), std::size_t(k), gen.energies()(k) - gen.energies()(j),
                                     std::abs(x_plus(j, k)), weight,
                                     gen.decay_rates()(j) + gen.decay_rates()(k) + 2.0 * eta,
                                     (std::size_t(k) < level_labels.size() ? level_labels[std::size_t(k)]
                                                                           : std::to_string(k)) +
                                         "->" +
                                         (std::size_t(j) < level_labels.size() ? level_labels[std::size_t(j)]
                                                                               : std::to_string(j))});
            }
    std::erase_if(out.lines, [&](const EmissionLine& l) {
        return max_weight <= 0.0 || l.weight < opts.line_weight_floor * max_weight;
    });
    std::sort(out.lines.begin(), out.lines.end(),
              [](const EmissionLine& a, const EmissionLine& b) { return a.frequency < b.frequency; });

    if (top > 0.0)
        out.peaks = extract_peaks(out, opts.peak_threshold).peaks;
    return out;
}

FluorescenceSpectrum fluorescence(const EigenDecomposition& eigs, const LindbladGenerator& gen,
                                  const SparseOperator& x_out, const std::vector<double>& omega_grid, double tau_max,
                                  const FluorescenceOptions& opts, const FloquetOptions& floquet) {
    const std::size_t m = gen.dimension();
    const PeriodicState state = steady_periodic_state(gen, floquet);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < m; ++i)
        labels.push_back(eigs.label(i));
    return fluorescence(gen, state, dressed_block(eigs, x_out, m), labels, omega_grid, tau_max, opts, floquet);
}

PeakSummary extract_peaks(const FluorescenceSpectrum& spectrum, double rel_threshold) {
    if (!(rel_threshold > 0.0 && rel_threshold < 1.0))
        throw std::invalid_argument("extract_peaks: threshold must lie in (0, 1)");
    const auto& s = spectrum.s_values;
    const auto& w = spectrum.omega_grid;
    if (s.empty() || s.size() != w.size())
        throw std::invalid_argument("extract_peaks: empty spectrum");
    const double top = *std::max_element(s.begin(), s.end());
    PeakSummary out;
    if (!(top > 0.0))
        return out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (!(s[i] > s[i - 1] && s[i] >= s[i + 1]) || s[i] < rel_threshold * top)
            continue;
        // Parabola through (i−1, i, i+1) on a locally uniform grid.
        double freq = w[i];
        const double curvature = s[i - 1] - 2.0 * s[i] + s[i + 1];
        if (curvature < 0.0) {
            const double offset = std::clamp(0.5 * (s[i - 1] - s[i + 1]) / curvature, -0.5, 0.5);
            freq += offset * 0.5 * (w[i + 1] - w[i - 1]);
        }
        Peak p{freq, s[i], std::nullopt, "unassigned"};
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < spectrum.lines.size(); ++l) {
            const auto& line = spectrum.lines[l];
            const double d = std::abs(line.frequency - freq);
            if (d <= 3.0 * line.linewidth && d < best) {
                best = d;
                p.transition = l;
                p.assignment = line.label;
            }
        }
        out.peaks.push_back(std::move(p));
    }
    if (!out.peaks.empty()) {
        double sum = 0.0;
        for (const auto& p : out.peaks)
            sum += p.frequency;
        out.centroid = sum / double(out.peaks.size());
        out.spread = out.peaks.back().frequency - out.peaks.front().frequency;
    }
    return out;
}

} // namespace twophoton
