#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "twophoton/dynamics.hpp"

using namespace twophoton;

namespace {

ModelParams rabi(double g2) {
    ModelParams p;
    p.g2 = g2;
    return p;
}

Eigen::MatrixXcd projector(std::size_t m, std::size_t k) {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(static_cast<long>(m), static_cast<long>(m));
    rho(static_cast<long>(k), static_cast<long>(k)) = 1.0;
    return rho;
}

Eigen::MatrixXcd random_density(std::size_t m, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Eigen::MatrixXcd a(static_cast<long>(m), static_cast<long>(m));
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j)
            a(i, j) = {n(rng), n(rng)};
    Eigen::MatrixXcd rho = a * a.adjoint();
    return rho / rho.trace();
}

// Three-level emitter: drive 0 ↔ 2, emission 2 → 1 → 0.
LindbladGenerator three_level(double omega, double gamma21, double gamma10) {
    Eigen::VectorXd e(3);
    e << 0.0, 0.8, 2.0;
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(3, 3);
    d(0, 2) = d(2, 0) = 1.0;
    return LindbladGenerator(e, {{1, 2, gamma21}, {0, 1, gamma10}}, d, omega, 2.0);
}

// Classical RK4 on the full generator, used as an independent reference for the exponential stepper.
Eigen::MatrixXcd plain_rk4(const LindbladGenerator& gen, Eigen::MatrixXcd rho, double t1, int steps) {
    const double h = t1 / steps;
    for (int s = 0; s < steps; ++s) {
        const double t = s * h;
        const Eigen::MatrixXcd k1 = gen.apply(t, rho);
        const Eigen::MatrixXcd k2 = gen.apply(t + h / 2, rho + h / 2 * k1);
        const Eigen::MatrixXcd k3 = gen.apply(t + h / 2, rho + h / 2 * k2);
        const Eigen::MatrixXcd k4 = gen.apply(t + h, rho + h * k3);
        rho += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return rho;
}

// Three levels leave no room for a truncation margin.
FloquetOptions small_system() {
    FloquetOptions opts;
    opts.truncation_guard = 1.0;
    return opts;
}

double excited_population(const PeriodicState& st) {
    double sum = 0.0;
    for (const auto& rho : st.rho)
        sum += 1.0 - rho(0, 0).real();
    return sum / double(st.rho.size());
}

} // namespace

TEST_CASE("cavity jump rates match a dense oracle") {
    const ModelParams p = rabi(0.1);
    const HilbertSpace s(1, 120);
    const auto eigs = diagonalize(build_hamiltonian(p, s), s, 12);
    const double kappa = 1e-3;
    const auto jumps = dressed_jump_operators(eigs, field(s), kappa, 1, 12);

    const Eigen::MatrixXcd h(build_hamiltonian(p, s).matrix());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    const Eigen::MatrixXcd x(field(s).matrix());
    const Eigen::MatrixXcd v = es.eigenvectors().leftCols(12);
    const Eigen::MatrixXcd xd = v.adjoint() * x * v;
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(12, 12);
    for (int k = 0; k < 12; ++k)
        for (int j = 0; j < k; ++j)
            expected(j, k) = kappa * (es.eigenvalues()(k) - es.eigenvalues()(j)) * std::norm(xd(j, k));
    Eigen::MatrixXd got = Eigen::MatrixXd::Zero(12, 12);
    for (const auto& t : jumps) {
        CHECK(eigs.energies(static_cast<long>(t.upper)) > eigs.energies(static_cast<long>(t.lower)));
        got(static_cast<long>(t.lower), static_cast<long>(t.upper)) = t.rate;
    }
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-8 * kappa);
}

TEST_CASE("decoupled cavity decay rate grows with photon number") {
    const HilbertSpace s(1, 20);
    const auto eigs = diagonalize(build_hamiltonian(rabi(0.0), s), s, 12);
    const double kappa = 2e-3;
    const auto jumps = dressed_jump_operators(eigs, field(s), kappa, 1, 12);
    int checked = 0;
    for (const auto& t : jumps) {
        const Eigen::VectorXcd up = eigs.states.col(static_cast<long>(t.upper));
        const Eigen::VectorXcd lo = eigs.states.col(static_cast<long>(t.lower));
        const Eigen::VectorXcd n_up = number_operator(s).matrix() * up;
        const Eigen::VectorXcd n_lo = number_operator(s).matrix() * lo;
        const double n = up.dot(n_up).real();
        CHECK(std::abs(n - std::round(n)) < 1e-10);
        CHECK(lo.dot(n_lo).real() == doctest::Approx(n - 1.0).epsilon(1e-10));
        CHECK(t.rate == doctest::Approx(kappa * n).epsilon(1e-10));
        ++checked;
    }
    CHECK(checked > 5);
}

TEST_CASE("generator preserves trace and Hermiticity") {
    const auto eigs = converge_spectrum(rabi(0.05), 16);
    DissipationSpec diss;
    diss.n_dressed = 16;
    DriveSpec drive;
    drive.amplitude = 0.3;
    const auto gen = LindbladGenerator::build(eigs, rabi(0.05), diss, drive);
    std::mt19937_64 rng(7);
    double worst_trace = 0.0, worst_herm = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Eigen::MatrixXcd rho = random_density(gen.dimension(), rng);
        const Eigen::MatrixXcd l = gen.apply(0.37 * i, rho);
        worst_trace = std::max(worst_trace, std::abs(l.trace()));
        worst_herm = std::max(worst_herm, (l - l.adjoint()).cwiseAbs().maxCoeff());
    }
    CHECK(worst_trace < 1e-12);
    CHECK(worst_herm < 1e-12);
}

TEST_CASE("generator validation") {
    Eigen::VectorXd e(2);
    e << 0.0, 1.0;
    const Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
    CHECK_THROWS_AS(LindbladGenerator(e, {{1, 0, 1e-3}}, d, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(LindbladGenerator(e, {{0, 1, 1e-3}}, d, -1.0, 1.0), std::invalid_argument);
    Eigen::MatrixXcd skew = Eigen::MatrixXcd::Zero(2, 2);
    skew(0, 1) = 1.0;
    CHECK_THROWS_AS(LindbladGenerator(e, {}, skew, 0.0, 1.0), std::invalid_argument);
    DissipationSpec diss;
    diss.spectral_exponent = 2;
    CHECK_THROWS_AS(diss.validate(), std::invalid_argument);
}

TEST_CASE("undriven ground state is stationary") {
    const auto eigs = converge_spectrum(rabi(0.1), 12);
    DissipationSpec diss;
    diss.n_dressed = 12;
    DriveSpec drive;
    drive.amplitude = 0.0;
    const auto gen = LindbladGenerator::build(eigs, rabi(0.1), diss, drive);
    const auto traj = evolve(projector(12, 0), gen, 0.0, 500.0, 0.5, 100);
    for (const auto& rho : traj.states)
        CHECK((rho - projector(12, 0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("undriven excited state decays exponentially") {
    const auto eigs = converge_spectrum(rabi(0.1), 12);
    DissipationSpec diss;
    diss.n_dressed = 12;
    DriveSpec drive;
    drive.amplitude = 0.0;
    const auto gen = LindbladGenerator::build(eigs, rabi(0.1), diss, drive);
    for (std::size_t k : {1u, 3u, 6u}) {
        const double gamma = gen.decay_rates()(static_cast<long>(k));
        REQUIRE(gamma > 0.0);
        const auto traj = evolve(projector(12, k), gen, 0.0, 2.0 / gamma, 0.5, 50);
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            const double expected = std::exp(-gamma * traj.times[i]);
            CHECK(traj.states[i](static_cast<long>(k), static_cast<long>(k)).real() == doctest::Approx(expected).epsilon(1e-4));
            CHECK(std::abs(traj.states[i].trace() - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("exponential stepper agrees with plain RK4 under strong drive") {
    const auto gen = three_level(0.05, 0.01, 0.02);
    const Eigen::MatrixXcd rho0 = projector(3, 0);
    const double t1 = 3.0 * gen.period();
    const auto traj = evolve(rho0, gen, 0.0, t1, gen.period() / 64);
    const Eigen::MatrixXcd ref = plain_rk4(gen, rho0, t1, 3 * 4096);
    CHECK((traj.states.back() - ref).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("evolve rejects unphysical input") {
    const auto gen = three_level(0.01, 0.01, 0.01);
    Eigen::MatrixXcd bad = projector(3, 0);
    bad(1, 1) = -0.5;
    bad(2, 2) = 0.5;
    CHECK_THROWS_AS(evolve(bad, gen, 0.0, 1.0, 0.1), std::invalid_argument);
    Eigen::MatrixXcd wrong_trace = 2.0 * projector(3, 0);
    CHECK_THROWS_AS(evolve(wrong_trace, gen, 0.0, 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("steady state without drive is the ground state") {
    const auto eigs = converge_spectrum(rabi(0.005), 12);
    DissipationSpec diss;
    diss.n_dressed = 12;
    for (double omega : {0.0, 1e-10}) {
        DriveSpec drive;
        drive.amplitude = omega;
        const auto gen = LindbladGenerator::build(eigs, rabi(0.005), diss, drive);
        const auto st = steady_periodic_state(gen);
        REQUIRE(st.rho.size() == 8);
        for (const auto& rho : st.rho)
            CHECK((rho - projector(12, 0)).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("steady state is periodic") {
    const auto gen = three_level(0.01, 0.02, 0.03);
    const auto st = steady_periodic_state(gen, small_system());
    const auto traj = evolve(st.rho[0], gen, 0.0, gen.period(), gen.period() / 64);
    CHECK((traj.states.back() - st.rho[0]).cwiseAbs().sum() < 1e-6);
    const auto half = evolve(st.rho[0], gen, 0.0, gen.period() / 2, gen.period() / 64);
    CHECK((half.states.back() - st.rho[4]).cwiseAbs().sum() < 1e-6);
}

TEST_CASE("weak-drive excited population scales with the square of the amplitude") {
    const auto eigs = converge_spectrum(rabi(0.005), 12);
    DissipationSpec diss;
    diss.kappa_cavity = diss.kappa_qubit = 1e-2;
    diss.n_dressed = 12;
    std::vector<double> pops;
    for (double omega : {1e-3, 2e-3}) {
        DriveSpec drive;
        drive.amplitude = omega;
        pops.push_back(excited_population(
            steady_periodic_state(LindbladGenerator::build(eigs, rabi(0.005), diss, drive))));
    }
    CHECK(pops[1] / pops[0] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("truncation guard fires when the top levels are populated") {
    const auto eigs = converge_spectrum(rabi(0.005), 12);
    DissipationSpec diss;
    diss.n_dressed = 12;
    DriveSpec drive;
    const auto gen = LindbladGenerator::build(eigs, rabi(0.005), diss, drive);
    FloquetOptions opts;
    opts.truncation_guard = 1e-30;
    CHECK_THROWS_AS(steady_periodic_state(gen, opts), TruncationError);
    CHECK_NOTHROW(steady_periodic_state(gen));
}

TEST_CASE("undriven fluorescence vanishes") {
    const auto eigs = converge_spectrum(rabi(0.005), 12);
    DissipationSpec diss;
    diss.n_dressed = 12;
    DriveSpec drive;
    drive.amplitude = 0.0;
    const auto gen = LindbladGenerator::build(eigs, rabi(0.005), diss, drive);
    std::vector<double> grid;
    for (double w = 0.5; w <= 1.5; w += 0.01)
        grid.push_back(w);
    const auto fs = fluorescence(eigs, gen, field(eigs.space), grid, 2000.0);
    CHECK(*std::max_element(fs.s_values.begin(), fs.s_values.end()) == 0.0);
    CHECK(*std::min_element(fs.s_values.begin(), fs.s_values.end()) == 0.0);
    CHECK(fs.peaks.empty());
}

TEST_CASE("fluorescence of a three-level emitter peaks at the emission line and matches direct quadrature") {
    const auto gen = three_level(1e-3, 0.02, 0.03);
    const auto st = steady_periodic_state(gen, small_system());
    Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(3, 3);
    x(1, 2) = x(2, 1) = 1.0;
    std::vector<double> grid;
    for (double w = 0.6; w <= 1.6; w += 5e-4)
        grid.push_back(w);
    const double tau_max = 750.0;
    const auto fs = fluorescence(gen, st, x, {"g", "m", "e"}, grid, tau_max, {}, small_system());

    // g(t, t) = ⟨X⁻X⁺⟩ at each phase, nonnegative.
    Eigen::MatrixXcd xp = Eigen::MatrixXcd::Zero(3, 3);
    xp(1, 2) = 1.0;
    for (std::size_t s = 0; s < st.rho.size(); ++s) {
        const Complex direct = (xp.adjoint() * xp * st.rho[s]).trace();
        CHECK(std::abs(fs.g0[s] - direct) < 1e-14);
        CHECK(fs.g0[s].real() >= -1e-12);
    }
    CHECK(fs.tail_ratio < 1e-3);
    CHECK_FALSE(fs.tau_max_warning);

    REQUIRE(fs.peaks.size() == 1);
    CHECK(std::abs(fs.peaks[0].frequency - 1.2) < 5e-4);
    CHECK(fs.peaks[0].assignment == "e->m");
    // Independent time-domain quadrature of the same correlation with plain RK4.
    const double h = gen.period() / 256;
    const int n = static_cast<int>(tau_max / h);
    const std::vector<double> probes = {1.185, 1.2, 1.215, 1.0};
    std::vector<Complex> brute(probes.size());
    for (std::size_t s = 0; s < st.rho.size(); ++s) {
        Eigen::MatrixXcd y = st.rho[s] * xp.adjoint();
        double t = st.phase_times[s];
        for (int i = 0; i <= n; ++i) {
            const Complex g = (xp * y).trace();
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            for (std::size_t k = 0; k < probes.size(); ++k)
                brute[k] += w * h * std::exp(Complex(-fs.window, probes[k]) * (i * h)) * g;
            const Eigen::MatrixXcd k1 = gen.apply(t, y);
            const Eigen::MatrixXcd k2 = gen.apply(t + h / 2, y + h / 2 * k1);
            const Eigen::MatrixXcd k3 = gen.apply(t + h / 2, y + h / 2 * k2);
            const Eigen::MatrixXcd k4 = gen.apply(t + h, y + h * k3);
            y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
            t += h;
        }
    }
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const auto it = std::lower_bound(grid.begin(), grid.end(), probes[k] - 1e-9);
        const double lib = fs.s_values[std::size_t(it - grid.begin())];
        const double ref = 2.0 * brute[k].real() / double(st.rho.size());
        CHECK(lib == doctest::Approx(ref).epsilon(1e-5));
    }
    // Integrated weight 2π g(t, t) for a fully decayed correlation.
    double area = 0.0;
    for (double v : fs.s_values)
        area += v * 5e-4;
    double mean_g0 = 0.0;
    for (const auto& g : fs.g0)
        mean_g0 += g.real() / double(fs.g0.size());
    CHECK(area == doctest::Approx(2.0 * std::numbers::pi * mean_g0).epsilon(0.05));
}

TEST_CASE("peak extraction on synthetic Lorentzians") {
    FluorescenceSpectrum fs;
    for (double w = 0.0; w <= 2.0; w += 1e-3) {
        fs.omega_grid.push_back(w);
        const auto lor = [&](double c, double a, double width) {
            return a / (1.0 + std::pow((w - c) / (0.5 * width), 2));
        };
        fs.s_values.push_back(lor(0.7003, 1.0, 0.01) + lor(1.3, 0.2, 0.02) + lor(1.8, 0.03, 0.01));
    }
    fs.lines.push_back({0, 1, 0.7, 1.0, 1.0, 0.01, "b->a"});
    fs.lines.push_back({0, 2, 1.35, 1.0, 1.0, 0.01, "c->a"});
    const auto s5 = extract_peaks(fs, 0.05);
    REQUIRE(s5.peaks.size() == 2);
    CHECK(s5.peaks[0].frequency == doctest::Approx(0.7003).epsilon(1e-4));
    CHECK(s5.peaks[0].assignment == "b->a");
    CHECK(s5.peaks[1].assignment == "unassigned");
    CHECK(s5.centroid == doctest::Approx(0.5 * (s5.peaks[0].frequency + s5.peaks[1].frequency)));
    CHECK(s5.spread == doctest::Approx(s5.peaks[1].frequency - s5.peaks[0].frequency));
    CHECK(extract_peaks(fs, 0.01).peaks.size() == 3);
    CHECK_THROWS_AS(extract_peaks(fs, 0.0), std::invalid_argument);
}

TEST_CASE("resonant drive frequency") {
    const HilbertSpace s(1, 40);
    CHECK(resonant_drive_frequency(diagonalize(build_hamiltonian(rabi(0.0), s), s, 6)) ==
          doctest::Approx(2.0).epsilon(1e-12));
    for (double g : {0.1, 0.19}) {
        const ModelParams p = rabi(g);
        const HilbertSpace dense_space(1, 150);
        const Eigen::MatrixXcd h(build_hamiltonian(p, dense_space).matrix());
        const Eigen::MatrixXcd par(photon_parity(dense_space).matrix());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        std::vector<double> even;
        for (long i = 0; i < es.eigenvalues().size() && even.size() < 3; ++i)
            if ((es.eigenvectors().col(i).adjoint() * par * es.eigenvectors().col(i))(0, 0).real() > 0)
                even.push_back(es.eigenvalues()(i));
        CHECK(resonant_drive_frequency(converge_spectrum(p, 8)) == doctest::Approx(even[2] - even[0]).epsilon(1e-8));
    }
}

TEST_CASE("decoupled system emits at the bare cavity frequency") {
    const auto eigs = converge_spectrum(rabi(0.0), 12);
    DissipationSpec diss;
    diss.n_dressed = 12;
    DriveSpec drive;
    drive.amplitude = 1e-4;
    drive.frequency = 1.0;
    drive.target = DriveTarget::on_cavity();
    const auto gen = LindbladGenerator::build(eigs, rabi(0.0), diss, drive);
    std::vector<double> grid;
    for (double w = 0.9; w <= 1.1; w += 5e-4)
        grid.push_back(w);
    const auto fs = fluorescence(eigs, gen, field(eigs.space), grid, 15000.0);
    REQUIRE_FALSE(fs.peaks.empty());
    const auto top = std::max_element(fs.peaks.begin(), fs.peaks.end(),
                                      [](const Peak& a, const Peak& b) { return a.height < b.height; });
    CHECK(std::abs(top->frequency - 1.0) < 5e-4);
}
