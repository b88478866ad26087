// End-to-end acceptance checks, one per release criterion. Each check prints
// exactly one PASS/FAIL line with the measured numbers; the process exits
// nonzero if anything failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <eitsense/fdm.hpp>
#include <eitsense/fem.hpp>
#include <eitsense/inverse.hpp>
#include <eitsense/io_util.hpp>
#include <eitsense/jacobian.hpp>
#include <eitsense/mesh.hpp>
#include <eitsense/parallel.hpp>
#include <eitsense/protocol.hpp>
#include <eitsense/scenario.hpp>
#include <eitsense/version.hpp>

using namespace eitsense;
using Clock = std::chrono::steady_clock;

namespace {

bool g_all_ok = true;

void report(int criterion, const std::string& label, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, label.c_str(),
                detail.c_str());
    std::fflush(stdout);
    g_all_ok = g_all_ok && ok;
}

void run(int criterion, const std::string& label, const std::function<void(bool&, std::ostringstream&)>& body) {
    bool ok = true;
    std::ostringstream detail;
    try {
        body(ok, detail);
    } catch (const std::exception& e) {
        ok = false;
        detail.str("");
        detail << "exception: " << e.what();
    }
    report(criterion, label, ok, detail.str());
}

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Protocol two_terminal() {
    Protocol protocol;
    Injection inj;
    inj.source = 1;
    inj.sink = 2;
    inj.amplitude = 165e-6;
    inj.frequency = 2e3;
    inj.measurements = {{1, 2}};
    protocol.injections.push_back(inj);
    return protocol;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// ---------------------------------------------------------------------------

void criterion_1(bool& ok, std::ostringstream& detail) {
    // Uniform 100 x 10 x 5 mm bar with ideal end electrodes:
    // V = I L / (sigma A) = 1.65 V.
    const double I = 165e-6, sigma0 = 0.2;
    const double v_exact = I * 0.1 / (sigma0 * 50e-6);
    auto start = Clock::now();

    Mesh mesh = generate_box_mesh({100.0, 10.0, 5.0}, 5.0);
    attach_electrode_on_face(mesh, 0, false, 0.0);
    attach_electrode_on_face(mesh, 0, true, 0.0);
    mesh.finalize();
    mesh.validate();

    std::vector<double> errors;
    for (int level = 0; level < 3; ++level) {
        if (level > 0) mesh = refine_uniform(mesh);
        CemSystem system(mesh, Conductivity(mesh, sigma0));
        double v = system.forward(two_terminal()).measurements[0];
        errors.push_back(std::abs(v - v_exact) / v_exact);
    }
    double elapsed_ms = ms_since(start);
    ok = ok && mesh.element_count() <= 20000;
    ok = ok && errors[1] < 0.01 && errors[2] < 0.002;
    ok = ok && elapsed_ms < 5000.0;

    // Contact impedance enters as an exact series term I*z/A_e per electrode.
    const double z = 1e-3, area_si = 50e-6;
    auto bar = [](double impedance) {
        Mesh m = generate_box_mesh({100.0, 10.0, 5.0}, 5.0);
        attach_electrode_on_face(m, 0, false, impedance);
        attach_electrode_on_face(m, 0, true, impedance);
        m.finalize();
        m.validate();
        return m;
    };
    Mesh lossy = bar(z);
    Mesh ideal = bar(0.0);
    double v_lossy = CemSystem(lossy, Conductivity(lossy, sigma0)).forward(two_terminal()).measurements[0];
    double v_ideal = CemSystem(ideal, Conductivity(ideal, sigma0)).forward(two_terminal()).measurements[0];
    double z_term = 2.0 * I * z / area_si;
    double z_err = std::abs((v_lossy - v_ideal) - z_term) / z_term;
    ok = ok && z_err < 1e-9;

    detail << "refine errors " << errors[1] << " / " << errors[2] << ", "
           << mesh.element_count() << " elements in " << elapsed_ms / 1000.0
           << " s, z-term rel err " << z_err;
}

void criterion_2(bool& ok, std::ostringstream& detail) {
    Mesh mesh = generate_hinged_actuator_mesh();
    CemSystem system(mesh, Conductivity(mesh, 0.2));
    const int n = mesh.node_count(), L = mesh.electrode_count();

    // Transfer impedances for every unordered electrode pair.
    auto z_of = [&](int a, int b, int c, int d) {
        Eigen::VectorXd field = system.unit_pair_field(a, b);
        return field[n + c - 1] - field[n + d - 1];
    };
    double scale = 0.0, worst = 0.0;
    for (int a = 1; a <= L; ++a)
        for (int b = a + 1; b <= L; ++b)
            for (int c = 1; c <= L; ++c)
                for (int d = c + 1; d <= L; ++d) {
                    double zf = z_of(a, b, c, d);
                    double zr = z_of(c, d, a, b);
                    scale = std::max(scale, std::abs(zf));
                    worst = std::max(worst, std::abs(zf - zr));
                }
    double rel = worst / scale;
    ok = ok && rel < 1e-9;
    detail << "worst drive/measure swap mismatch " << rel << " relative";
}

void criterion_3(bool& ok, std::ostringstream& detail) {
    // 600-element block with ideal electrodes; tied patches must not share
    // mesh nodes, so each one covers a single grid square.
    Mesh mesh = generate_box_mesh({20.0, 10.0, 4.0}, 2.0);
    for (double x : {3.0, 7.0, 13.0, 17.0})
        attach_electrode_patch(mesh, 2, true, {x, 5.0, 0.0}, 1.9, 0.0);
    mesh.finalize();
    mesh.validate();
    if (mesh.element_count() > 2000) {
        ok = false;
        detail << "mesh too large";
        return;
    }
    Protocol protocol;
    Injection inj;
    inj.source = 1;
    inj.sink = 4;
    inj.amplitude = 165e-6;
    inj.frequency = 2e3;
    inj.measurements = {{2, 3}, {1, 4}};
    protocol.injections.push_back(inj);
    inj.source = 2;
    inj.sink = 3;
    inj.frequency = 4e3;
    inj.measurements = {{1, 4}, {2, 3}};
    protocol.injections.push_back(inj);

    Conductivity sigma(mesh, 0.2);
    CemSystem system(mesh, sigma);
    Eigen::VectorXd v0 = system.forward(protocol).measurements;
    Eigen::MatrixXd J = compute_jacobian(system, protocol);

    std::mt19937_64 rng(2026);
    std::uniform_int_distribution<int> pick(0, mesh.element_count() - 1);
    const double step = 0.2 * 1e-3;  // 0.1% single-element perturbation
    double max_fd = 0.0, worst = 0.0;
    std::vector<std::pair<int, Eigen::VectorXd>> fds;
    for (int trial = 0; trial < 20; ++trial) {
        int k = pick(rng);
        Conductivity plus = sigma, minus = sigma;
        plus[k] += step;
        minus[k] -= step;
        system.update_conductivity(plus);
        Eigen::VectorXd vp = system.forward(protocol).measurements;
        system.update_conductivity(minus);
        Eigen::VectorXd vm = system.forward(protocol).measurements;
        Eigen::VectorXd fd = (vp - vm) / (2.0 * step);
        max_fd = std::max(max_fd, fd.lpNorm<Eigen::Infinity>());
        fds.emplace_back(k, fd);
    }
    for (const auto& [k, fd] : fds)
        for (int m = 0; m < J.rows(); ++m)
            worst = std::max(worst,
                             std::abs(J(m, k) - fd[m]) / std::max(std::abs(fd[m]), 1e-6 * max_fd));
    ok = ok && worst < 1e-2;

    // Homogeneity: J sigma0 = -v with ideal electrodes.
    system.update_conductivity(sigma);
    Eigen::VectorXd predicted = J * sigma.values();
    double scaling_err =
        (predicted + v0).lpNorm<Eigen::Infinity>() / v0.lpNorm<Eigen::Infinity>();
    ok = ok && scaling_err < 1e-3;
    detail << "worst FD mismatch " << worst << ", scaling identity err " << scaling_err;
}

void criterion_4(bool& ok, std::ostringstream& detail) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    auto random_matrix = [&](int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
        return m;
    };
    double worst = 0.0;
    for (auto [m, n, lambda] : {std::tuple<int, int, double>{3, 7, 1e-2},
                                 {9, 150, 1e-4},
                                 {9, 500, 1e-6}}) {
        Eigen::MatrixXd J = random_matrix(m, n);
        Eigen::VectorXd dv(m);
        for (int i = 0; i < m; ++i) dv[i] = gauss(rng);
        Eigen::VectorXd fast = ReconstructionOperator::build(J, lambda).apply(dv);
        // Stable dense evaluation of the normal equations: QR on the stacked
        // system [J; sqrt(lambda) I] (forming J^T J would square the
        // condition number and degrade the oracle below the test tolerance).
        Eigen::MatrixXd stacked(m + n, n);
        stacked.topRows(m) = J;
        stacked.bottomRows(n) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + n);
        rhs.head(m) = dv;
        Eigen::VectorXd dense = stacked.colPivHouseholderQr().solve(rhs);
        worst = std::max(worst, (fast - dense).norm() / dense.norm());
    }
    ok = ok && worst < 1e-10;

    Eigen::MatrixXd J = random_matrix(9, 300);
    Eigen::VectorXd dv(9);
    for (int i = 0; i < 9; ++i) dv[i] = gauss(rng);
    std::vector<double> grid = default_lambda_grid(J);
    bool monotone = grid.size() == 40;
    double prev_res = -1.0, prev_norm = 1e300;
    for (double lambda : grid) {
        ReconstructionResult r = reconstruct(J, dv, lambda);
        monotone = monotone && r.residual >= prev_res && r.solution_norm <= prev_norm;
        prev_res = r.residual;
        prev_norm = r.solution_norm;
    }
    ok = ok && monotone;
    detail << "worst oracle mismatch " << worst << ", 40-point L-curve monotone "
           << (monotone ? "yes" : "no");
}

void criterion_5(bool& ok, std::ostringstream& detail) {
    Mesh mesh = generate_hinged_actuator_mesh();
    Protocol protocol = make_hinged_protocol();
    Eigen::VectorXd truth =
        CemSystem(mesh, Conductivity(mesh, 0.2)).forward(protocol).measurements;

    NoiseModel clean;
    clean.quantize = false;
    TimeSeries frame = synthesize_frame(protocol, truth, 50e3, 20e-3, clean, 1);
    Eigen::VectorXd recovered = demodulate_frame(frame, protocol).in_phase();
    double worst = 0.0;
    for (int m = 0; m < truth.size(); ++m)
        worst = std::max(worst, std::abs(recovered[m] - truth[m]) / std::abs(truth[m]));
    ok = ok && worst < 1e-6;

    OrthogonalityReport report = check_orthogonality({2e3, 4e3, 6e3}, 20e-3, 50e3);
    ok = ok && report.ok && report.worst_leakage_db < -120.0;
    detail << "round-trip rel err " << worst << ", leakage " << report.worst_leakage_db
           << " dB";
}

void criterion_6(bool& ok, std::ostringstream& detail) {
    Protocol protocol;
    Injection inj;
    inj.source = 1;
    inj.sink = 2;
    inj.amplitude = 165e-6;
    inj.frequency = 2e3;
    inj.measurements = {{1, 2}};
    protocol.injections.push_back(inj);

    const double amplitude = 0.05;
    const int samples = 1000;  // 20 ms at 50 kHz
    Eigen::VectorXd truth(1);
    truth << amplitude;

    auto snr_with = [&](double std_volts) {
        NoiseModel noise;
        noise.quantize = false;
        noise.std_volts = std_volts;
        std::vector<VoltageFrame> frames;
        for (int f = 0; f < 100; ++f)
            frames.push_back(demodulate_frame(
                synthesize_frame(protocol, truth, 50e3, 20e-3, noise, derive_seed(kDefaultSeed, "snr", f)),
                protocol));
        return compute_snr(frames)[0];
    };
    double calibrated = noise_std_for_snr(amplitude, samples, 66.0);
    double snr = snr_with(calibrated);
    double snr_double = snr_with(2.0 * calibrated);
    double drop = snr - snr_double;
    ok = ok && std::abs(snr - 66.0) <= 1.0;
    ok = ok && std::abs(drop - 6.0) <= 0.3;
    detail << "snr " << snr << " dB, doubling noise drops " << drop << " dB";
}

void criterion_7(bool& ok, std::ostringstream& detail) {
    ScenarioConfig config;
    config.kind = "phantom";  // defaults: 6 carriers 2-12 kHz, 100 frames, 66 dB
    PhantomResult result = run_resistor_phantom(config);
    double worst = result.frequency_spread.maxCoeff();
    ok = ok && result.mean_voltage.cols() == 6 && worst < 0.005;
    detail << "worst per-frequency spread " << worst * 100.0 << "% across "
           << result.mean_voltage.cols() << " carriers";
}

void criterion_8(bool& ok, std::ostringstream& detail) {
    int hinged_hits = 0, finger_hits = 0;
    double cross = 0.0;

    ScenarioConfig hinged;
    hinged.kind = "reconstruction";
    ReconstructionExperimentResult hr = run_reconstruction_experiment(hinged);
    for (const LocalizationCase& c : hr.cases) hinged_hits += c.hit ? 1 : 0;
    cross = std::max(cross, hr.motion_cross_talk);

    ScenarioConfig finger;
    finger.kind = "finger-localization";
    ReconstructionExperimentResult fr = run_reconstruction_experiment(finger);
    for (const LocalizationCase& c : fr.cases) finger_hits += c.hit ? 1 : 0;
    cross = std::max(cross, fr.motion_cross_talk);

    ok = ok && hinged_hits == 10 && finger_hits == 10 && cross < 0.05;
    detail << "hinged " << hinged_hits << "/10, finger " << finger_hits
           << "/10, motion cross-talk " << cross * 100.0 << "%";
}

void criterion_9(bool& ok, std::ostringstream& detail) {
    set_thread_count(1);
    Mesh mesh = generate_hinged_actuator_mesh();
    Protocol protocol = make_hinged_protocol();
    Eigen::VectorXd truth =
        CemSystem(mesh, Conductivity(mesh, 0.2)).forward(protocol).measurements;
    NoiseModel clean;
    clean.quantize = false;
    TimeSeries frame = synthesize_frame(protocol, truth, 50e3, 20e-3, clean, 1);

    double demod_ms = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
        auto start = Clock::now();
        VoltageFrame result = demodulate_frame(frame, protocol);
        demod_ms = std::min(demod_ms, ms_since(start));
        if (result.amplitude.size() != 9) ok = false;
    }

    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd J(9, 5000);
    for (int i = 0; i < J.rows(); ++i)
        for (int j = 0; j < J.cols(); ++j) J(i, j) = gauss(rng);
    ReconstructionOperator op = ReconstructionOperator::build(J, 1e-3);
    Eigen::VectorXd dv(9);
    for (int i = 0; i < 9; ++i) dv[i] = gauss(rng);
    double apply_ms = 1e300;
    volatile double sink = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
        auto start = Clock::now();
        Eigen::VectorXd ds = op.apply(dv);
        apply_ms = std::min(apply_ms, ms_since(start));
        sink = sink + ds.sum();
    }
    set_thread_count(0);

    ok = ok && demod_ms < 20.0 && apply_ms < 50.0;
    detail << "demodulation " << demod_ms << " ms (< 20), operator apply " << apply_ms
           << " ms (< 50), single core";
}

void criterion_10(bool& ok, std::ostringstream& detail) {
    namespace fs = std::filesystem;
    fs::path base = fs::temp_directory_path() / ("eitsense-acc10-" + std::to_string(getpid()));
    fs::path dir_a = base / "a", dir_b = base / "b";
    fs::create_directories(dir_a);
    fs::create_directories(dir_b);

    auto cli = [&](const fs::path& dir, const std::string& args) {
        std::string command = std::string(EITSENSE_CLI_PATH) + " --seed 4242 --out-dir " +
                              dir.string() + " " + args + " > /dev/null 2>&1";
        return std::system(command.c_str()) == 0;
    };
    for (const fs::path& dir : {dir_a, dir_b}) {
        bool ran = cli(dir, "mesh finger --out chamber.eitmesh") &&
                   cli(dir, "forward --mesh builtin:finger --protocol builtin:finger") &&
                   cli(dir, "fdm --protocol builtin:finger --amplitudes " +
                                (dir / "voltages.csv").string() +
                                " --noise-std 1e-4 --quantize --repeats 10");
        if (!ran) {
            ok = false;
            detail << "CLI run failed";
            fs::remove_all(base);
            return;
        }
    }

    int compared = 0;
    std::string first_diff;
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        std::string name = entry.path().filename().string();
        std::string a = slurp(entry.path()), b = slurp(dir_b / name);
        if (name.find(".manifest.json") != std::string::npos) {
            // Timestamps (and the out-dir prefix inside paths) may differ.
            auto normalize = [&](std::string text, const std::string& dir) {
                std::ostringstream out;
                std::istringstream in(text);
                std::string line;
                while (std::getline(in, line)) {
                    if (line.find("\"timestamp\"") != std::string::npos) continue;
                    std::size_t pos;
                    while ((pos = line.find(dir)) != std::string::npos)
                        line.replace(pos, dir.size(), "OUT");
                    out << line << '\n';
                }
                return out.str();
            };
            a = normalize(a, dir_a.string());
            b = normalize(b, dir_b.string());
        }
        ++compared;
        if (a != b && first_diff.empty()) first_diff = name;
    }
    fs::remove_all(base);
    ok = ok && compared >= 6 && first_diff.empty();
    if (first_diff.empty())
        detail << compared << " output files bit-identical across reruns";
    else
        detail << "file " << first_diff << " differs between identical runs";
}

}  // namespace

int main() {
    std::printf("eitsense %s acceptance run\n", kVersion);
    run(1, "analytic bar accuracy and contact-impedance term", criterion_1);
    run(2, "reciprocity on the hinged actuator", criterion_2);
    run(3, "Jacobian vs finite differences and scaling identity", criterion_3);
    run(4, "Tikhonov oracle equivalence and L-curve monotonicity", criterion_4);
    run(5, "noiseless FDM round trip and inter-tone leakage", criterion_5);
    run(6, "SNR calibration at 66 dB and noise doubling", criterion_6);
    run(7, "resistor phantom frequency invariance", criterion_7);
    run(8, "perturbation localization and DOF isolation", criterion_8);
    run(9, "real-time demodulation and reconstruction budgets", criterion_9);
    run(10, "bit-identical reruns from one seed", criterion_10);
    if (!g_all_ok) {
        std::printf("acceptance: FAILURES PRESENT\n");
        return 1;
    }
    std::printf("acceptance: all criteria satisfied\n");
    return 0;
}
