#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unistd.h>

#include "twophoton/cli.hpp"

using namespace twophoton;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per call, removed by the destructor.
struct Scratch {
    fs::path dir;

    Scratch() {
        static int counter = 0;
        dir = fs::temp_directory_path() /
              ("twophoton_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }

    fs::path write(const std::string& name, const std::string& body) const {
        std::ofstream(dir / name) << body;
        return dir / name;
    }
};

std::string read(const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

struct Outcome {
    int code;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "twophoton");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(int(argv.size()), argv.data(), out, err);
    return {code, err.str()};
}

const char* fast_fluorescence = R"(model.g2 = 0.005
drive.frequency = auto
dissipation.n_dressed = 12
fluorescence.omega_start = 0.9
fluorescence.omega_stop = 1.1
fluorescence.omega_step = 0.0005
)";

} // namespace

TEST_CASE("config parsing") {
    const auto c = cli::parse_config(R"(# comment
model.g2 = 0.1   # trailing comment
model.n_qubits = 3
model.coupling_form = pair_only
drive.frequency = 2.5
drive.target = cavity
sweep.start = 0
sweep.stop = 0.05
sweep.step = 0.01
output.format = json
)");
    CHECK(c.model.g2 == 0.1);
    CHECK(c.model.n_qubits == 3);
    CHECK(c.model.coupling_form == CouplingForm::PairOnly);
    CHECK_FALSE(c.drive_frequency_auto);
    CHECK(*c.drive.frequency == 2.5);
    CHECK(c.drive.target.kind == DriveTarget::Kind::Cavity);
    CHECK(c.format == cli::OutputFormat::Json);
    CHECK(c.has_section("drive"));
    CHECK_FALSE(c.has_section("dissipation"));
    REQUIRE(c.sweep);
    const auto g = c.coupling_values();
    REQUIRE(g.size() == 6);
    CHECK(g.back() == doctest::Approx(0.05));
    CHECK(std::find(c.defaulted.begin(), c.defaulted.end(), "model.omega_q") != c.defaulted.end());
    CHECK(std::find(c.defaulted.begin(), c.defaulted.end(), "model.g2") == c.defaulted.end());
    CHECK(cli::parse_config("").coupling_values() == std::vector<double>{0.0});
}

TEST_CASE("config errors") {
    for (const char* bad : {"model.g3 = 1", "model.g2 = x", "model.g2 = 0.1\nmodel.g2 = 0.2", "model.g2",
                            "model.g2 = -1", "model.n_qubits = 0", "sweep.start = 0\nsweep.stop = 1\nsweep.step = 0",
                            "sweep.start = 0\nsweep.stop = 1", "output.format = xml", "drive.target = qubit:2",
                            "fluorescence.peak_threshold = 1.5", "floquet.steps_per_period = 60",
                            "dissipation.spectral_exponent = 3", "model.g2 = 1e400"})
        CHECK_THROWS_AS(cli::parse_config(bad), cli::ConfigError);
    CHECK_THROWS_AS(cli::load_config("/nonexistent/config.txt"), cli::ConfigError);
}

TEST_CASE("tau_max defaults to fifteen slowest decay times") {
    auto c = cli::parse_config("dissipation.kappa_cavity = 2e-3\ndissipation.kappa_qubit = 0");
    CHECK(c.resolved_tau_max() == doctest::Approx(7500.0));
    c = cli::parse_config("dissipation.kappa_cavity = 0\ndissipation.kappa_qubit = 0");
    CHECK_THROWS_AS(c.resolved_tau_max(), cli::ConfigError);
}

TEST_CASE("spectrum command writes the level table") {
    Scratch s;
    const auto cfg = s.write("c.cfg", "sweep.start = 0\nsweep.stop = 0.2\nsweep.step = 0.05\nspectrum.levels = 6\n");
    const auto r = run({"spectrum", "--config", cfg.string(), "--out", (s.dir / "out").string()});
    REQUIRE(r.code == 0);
    const auto rows = lines(read(s.dir / "out" / "spectrum.csv"));
    REQUIRE(rows.size() == 1 + 5 * 6);
    CHECK(rows[0] == "g,level_index,energy,parity,converged");
    CHECK(rows[1] == "0,0,-1,1,true");

    const auto meta = nlohmann::json::parse(read(s.dir / "out" / "meta.json"));
    CHECK(meta["version"] == cli::version());
    CHECK(meta["units"].get<std::string>().find("omega_c") != std::string::npos);
    CHECK(meta["parameters"]["model"]["omega_q"] == 2.0);
    CHECK(meta["cutoffs"].size() == 5);
    CHECK_FALSE(meta["defaults_applied"].empty());

    // Same config, byte-identical body.
    const auto again = run({"spectrum", "--config", cfg.string(), "--out", (s.dir / "again").string()});
    REQUIRE(again.code == 0);
    CHECK(read(s.dir / "out" / "spectrum.csv") == read(s.dir / "again" / "spectrum.csv"));
}

TEST_CASE("spectrum with inter-spin coupling keeps the schema") {
    Scratch s;
    const std::string base = "model.n_qubits = 3\nsweep.start = 0\nsweep.stop = 0.06\nsweep.step = 0.03\n"
                             "spectrum.levels = 6\n";
    const auto plain = s.write("a.cfg", base);
    const auto coupled = s.write("b.cfg", base + "model.j_interspin = 0.2\n");
    REQUIRE(run({"spectrum", "--config", plain.string(), "--out", (s.dir / "a").string()}).code == 0);
    REQUIRE(run({"spectrum", "--config", coupled.string(), "--out", (s.dir / "b").string()}).code == 0);
    const auto a = lines(read(s.dir / "a" / "spectrum.csv"));
    const auto b = lines(read(s.dir / "b" / "spectrum.csv"));
    REQUIRE(a.size() == b.size());
    CHECK(a[0] == b[0]);
    CHECK(a != b);
}

TEST_CASE("spectrum command rejects bad input before writing") {
    Scratch s;
    const auto zero_step = s.write("z.cfg", "sweep.start = 0\nsweep.stop = 0.2\nsweep.step = 0\n");
    CHECK(run({"spectrum", "--config", zero_step.string(), "--out", (s.dir / "z").string()}).code == 2);
    CHECK_FALSE(fs::exists(s.dir / "z"));
    const auto no_sweep = s.write("n.cfg", "model.g2 = 0.1\n");
    CHECK(run({"spectrum", "--config", no_sweep.string(), "--out", (s.dir / "n").string()}).code == 2);
    const auto past = s.write("p.cfg", "sweep.start = 0\nsweep.stop = 0.3\nsweep.step = 0.1\n");
    CHECK(run({"spectrum", "--config", past.string(), "--out", (s.dir / "p").string()}).code == 2);
    CHECK_FALSE(fs::exists(s.dir / "p"));
    CHECK(run({"spectrum"}).code == 2);
    CHECK(run({"bogus", "--config", no_sweep.string()}).code == 2);
}

TEST_CASE("spectrum command reports non-convergence with the failing coupling") {
    Scratch s;
    const auto cfg = s.write("c.cfg", "sweep.start = 0.2\nsweep.stop = 0.2\nsweep.step = 0.1\n"
                                      "spectrum.n_max_cap = 64\nspectrum.levels = 30\n");
    const auto r = run({"spectrum", "--config", cfg.string(), "--out", (s.dir / "o").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("g2 = 0.2") != std::string::npos);
}

TEST_CASE("collapse command") {
    Scratch s;
    const auto cfg = s.write("c.cfg", "model.n_qubits = 1\n");
    REQUIRE(run({"collapse", "--config", cfg.string(), "--out", s.dir.string()}).code == 0);
    const auto j = nlohmann::json::parse(read(s.dir / "collapse.json"));
    CHECK(j["g_col_analytic"] == 0.25);
    CHECK(std::abs(j["g_col_estimated"].get<double>() - 0.25) < 0.005);
    CHECK(j["method"] == "convergence-failure");
    CHECK(j["spacing_curve"].size() >= 4);
    CHECK(fs::exists(s.dir / "meta.json"));
}

TEST_CASE("fluorescence command") {
    Scratch s;
    const auto cfg = s.write("f.cfg", fast_fluorescence);
    const auto r = run({"fluorescence", "--config", cfg.string(), "--out", s.dir.string(), "--strict"});
    REQUIRE(r.code == 0);
    const auto spectrum = lines(read(s.dir / "fluorescence.csv"));
    CHECK(spectrum[0] == "omega,s_value");
    CHECK(spectrum.size() == 402);
    const auto peaks = lines(read(s.dir / "peaks.csv"));
    REQUIRE(peaks.size() == 3);
    CHECK(peaks[0] == "frequency,height,assignment");
    CHECK(peaks[1].find("Psi0-->Psi0+") != std::string::npos);
    CHECK(peaks[2].find("Psi2+->Psi0-") != std::string::npos);
    const auto meta = nlohmann::json::parse(read(s.dir / "meta.json"));
    CHECK(meta["drive_frequency"].get<double>() > 2.0);
    CHECK(meta["tau_max"] == doctest::Approx(15000.0));
    CHECK_FALSE(meta["tau_max_warning"].get<bool>());
}

TEST_CASE("fluorescence command over a sweep writes one directory per coupling") {
    Scratch s;
    const auto cfg = s.write("f.cfg", std::string(fast_fluorescence) +
                                          "sweep.start = 0.005\nsweep.stop = 0.015\nsweep.step = 0.01\n");
    REQUIRE(run({"fluorescence", "--config", cfg.string(), "--out", s.dir.string()}).code == 0);
    for (const char* g : {"g_0.005", "g_0.015"})
        for (const char* file : {"fluorescence.csv", "peaks.csv", "meta.json"})
            CHECK(fs::exists(s.dir / g / file));
}

TEST_CASE("fluorescence command failure modes") {
    Scratch s;
    const auto short_tau = s.write("t.cfg", std::string(fast_fluorescence) + "fluorescence.tau_max = 300\n");
    CHECK(run({"fluorescence", "--config", short_tau.string(), "--out", (s.dir / "a").string()}).code == 0);
    const auto strict = run({"fluorescence", "--config", short_tau.string(), "--out", (s.dir / "b").string(),
                             "--strict"});
    CHECK(strict.code == 4);
    CHECK(strict.err.find("tau_max") != std::string::npos);

    const auto guard = s.write("g.cfg", std::string(fast_fluorescence) + "floquet.truncation_guard = 1e-30\n");
    const auto r = run({"fluorescence", "--config", guard.string(), "--out", (s.dir / "c").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("increase M") != std::string::npos);

    const auto no_drive = s.write("d.cfg", "model.g2 = 0.005\ndissipation.n_dressed = 12\n");
    CHECK(run({"fluorescence", "--config", no_drive.string(), "--out", (s.dir / "d").string()}).code == 2);
}
