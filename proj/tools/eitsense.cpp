// Command-line front end: composable subcommands over the library, each one
// reading/writing the versioned file formats and dropping a JSON manifest
// next to its outputs. Exit codes: 0 success, 1 validation failure, 2
// numerical failure.

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "eitsense/errors.hpp"
#include "eitsense/fdm.hpp"
#include "eitsense/fem.hpp"
#include "eitsense/inverse.hpp"
#include "eitsense/io_util.hpp"
#include "eitsense/jacobian.hpp"
#include "eitsense/manifest.hpp"
#include "eitsense/mesh.hpp"
#include "eitsense/mesh_io.hpp"
#include "eitsense/parallel.hpp"
#include "eitsense/protocol.hpp"
#include "eitsense/scenario.hpp"
#include "eitsense/version.hpp"

namespace {

using namespace eitsense;

struct GlobalArgs {
    std::uint64_t seed = kDefaultSeed;
    int threads = 0;  // 0 = all hardware threads
    std::string out_dir = ".";
    std::vector<std::string> command_line;
};

std::string iso_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buffer;
}

RunManifest start_manifest(const GlobalArgs& global, const std::string& tool) {
    RunManifest manifest;
    manifest.tool = tool;
    manifest.version = kVersion;
    manifest.command_line = global.command_line;
    manifest.seed = global.seed;
    manifest.threads = thread_count();
    manifest.timestamp = iso_timestamp();
    return manifest;
}

std::string out_path(const GlobalArgs& global, const std::string& name) {
    std::filesystem::create_directories(global.out_dir);
    return (std::filesystem::path(global.out_dir) / name).string();
}

void finish_manifest(RunManifest& manifest, const GlobalArgs& global) {
    manifest.save(out_path(global, manifest.tool + ".manifest.json"));
}

// Voltage CSV ("EITVOLT 1"): index,voltage rows. Shared by forward output,
// fdm amplitude input and reconstruct delta-v input.
void write_voltages(const Eigen::VectorXd& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << "# EITVOLT 1\nindex,voltage\n";
    for (int m = 0; m < v.size(); ++m) out << m << ',' << format_double(v[m]) << '\n';
}

Eigen::VectorXd read_voltages(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open voltage file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("# EITVOLT 1", 0) != 0)
        throw ValidationError("'" + path + "' is not an EITVOLT 1 file");
    if (!std::getline(in, line)) throw ValidationError("voltage file has no header row");
    std::vector<double> values;
    int expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw ValidationError("voltage row '" + line + "' is not index,value");
        if (parse_int(line.substr(0, comma)) != expected++)
            throw ValidationError("voltage rows must be sequential from 0");
        values.push_back(parse_double(line.substr(comma + 1)));
    }
    return Eigen::Map<Eigen::VectorXd>(values.data(),
                                       static_cast<Eigen::Index>(values.size()));
}

Mesh mesh_from_source(const std::string& source, RunManifest& manifest) {
    if (source == "builtin:hinged") return generate_hinged_actuator_mesh();
    if (source == "builtin:finger") return generate_finger_chamber_mesh();
    manifest.add_input(source);
    return load_mesh(source);
}

Protocol protocol_from_source(const std::string& source, RunManifest& manifest) {
    if (source == "builtin:hinged") return make_hinged_protocol();
    if (source == "builtin:finger") return make_finger_protocol(2e3);
    manifest.add_input(source);
    return Protocol::load(source);
}

Conductivity sigma_from_args(const Mesh& mesh, double uniform, const std::string& file,
                             const std::vector<std::string>& region_scales,
                             RunManifest& manifest) {
    Conductivity sigma(mesh, uniform);
    if (!file.empty()) {
        manifest.add_input(file);
        sigma = Conductivity(load_reconstruction(file));
    }
    for (const std::string& spec : region_scales) {
        std::size_t colon = spec.find(':');
        if (colon == std::string::npos)
            throw ValidationError("--scale-region wants TAG:FACTOR, got '" + spec + "'");
        sigma.scale_region(mesh, static_cast<int>(parse_int(spec.substr(0, colon))),
                           parse_double(spec.substr(colon + 1)));
    }
    sigma.validate(mesh);
    return sigma;
}

// --------------------------------------------------------------------------
// Subcommands

struct MeshArgs {
    std::string kind = "hinged";
    std::string input;
    std::vector<double> lengths{200.0, 50.0, 8.0};
    double edge = 2.5;
    double electrode_size = 2.0;
    double impedance = 1e-3;
    int refine = 0;
    double refine_radius = 0.0;
    double refine_factor = 2.0;
    std::string out = "mesh.eitmesh";
    std::string vtk;
};

int cmd_mesh(const GlobalArgs& global, const MeshArgs& args) {
    RunManifest manifest = start_manifest(global, "mesh");
    Mesh mesh;
    if (!args.input.empty()) {
        manifest.add_input(args.input);
        mesh = load_mesh(args.input);
        manifest.parameters["source"] = args.input;
    } else if (args.kind == "hinged") {
        HingedActuatorParams params;
        params.target_edge_length = args.edge;
        params.electrode_size = args.electrode_size;
        params.contact_impedance = args.impedance;
        mesh = generate_hinged_actuator_mesh(params);
        manifest.parameters["source"] = "hinged";
    } else if (args.kind == "finger") {
        FingerChamberParams params;
        params.target_edge_length = args.edge;
        params.electrode_size = args.electrode_size;
        params.contact_impedance = args.impedance;
        mesh = generate_finger_chamber_mesh(params);
        manifest.parameters["source"] = "finger";
    } else if (args.kind == "box") {
        mesh = generate_box_mesh(args.lengths, args.edge);
        attach_electrode_on_face(mesh, 0, false, args.impedance);
        attach_electrode_on_face(mesh, 0, true, args.impedance);
        mesh.validate();
        manifest.parameters["source"] = "box";
    } else {
        throw ValidationError("unknown mesh kind '" + args.kind +
                              "' (expected hinged, finger or box)");
    }

    for (int i = 0; i < args.refine; ++i) mesh = refine_uniform(mesh);
    if (args.refine_radius > 0.0)
        mesh = refine_near_electrodes(mesh, args.refine_radius, args.refine_factor);
    mesh.validate();

    manifest.parameters["edge_mm"] = format_double(args.edge);
    manifest.parameters["elements"] = std::to_string(mesh.element_count());
    manifest.parameters["electrodes"] = std::to_string(mesh.electrode_count());

    std::string path = out_path(global, args.out);
    save_mesh(mesh, path);
    manifest.add_output(path);
    if (!args.vtk.empty()) {
        std::string vtk = out_path(global, args.vtk);
        Eigen::VectorXd tags(mesh.element_count());
        for (int e = 0; e < mesh.element_count(); ++e) tags[e] = mesh.region_tags[e];
        export_vtk(mesh, vtk, tags, "region_tag");
        manifest.add_output(vtk);
    }
    finish_manifest(manifest, global);
    std::cout << "mesh: " << mesh.node_count() << " nodes, " << mesh.element_count()
              << " elements, " << mesh.electrode_count() << " electrodes -> " << path << "\n";
    return 0;
}

struct ForwardArgs {
    std::string mesh = "builtin:hinged";
    std::string protocol = "builtin:hinged";
    double sigma = 0.2;
    std::string sigma_file;
    std::vector<std::string> region_scales;
    std::string out = "voltages.csv";
};

int cmd_forward(const GlobalArgs& global, const ForwardArgs& args) {
    RunManifest manifest = start_manifest(global, "forward");
    Mesh mesh = mesh_from_source(args.mesh, manifest);
    Protocol protocol = protocol_from_source(args.protocol, manifest);
    protocol.validate(mesh);
    Conductivity sigma =
        sigma_from_args(mesh, args.sigma, args.sigma_file, args.region_scales, manifest);

    CemSystem system(mesh, sigma);
    ForwardResult result = system.forward(protocol);

    manifest.parameters["sigma"] = format_double(args.sigma);
    manifest.parameters["measurements"] = std::to_string(protocol.measurement_count());
    std::string path = out_path(global, args.out);
    write_voltages(result.measurements, path);
    manifest.add_output(path);
    finish_manifest(manifest, global);
    std::cout << "forward: " << protocol.measurement_count() << " measurements -> " << path
              << "\n";
    return 0;
}

struct JacobianArgs {
    std::string mesh = "builtin:hinged";
    std::string protocol = "builtin:hinged";
    double sigma = 0.2;
    std::string sigma_file;
    std::vector<std::string> region_scales;
    double hex_voxel = 0.0;
    bool rows = false;
    std::string out = "jacobian.eitjac";
};

int cmd_jacobian(const GlobalArgs& global, const JacobianArgs& args) {
    RunManifest manifest = start_manifest(global, "jacobian");
    Mesh mesh = mesh_from_source(args.mesh, manifest);
    Protocol protocol = protocol_from_source(args.protocol, manifest);
    protocol.validate(mesh);
    Conductivity sigma =
        sigma_from_args(mesh, args.sigma, args.sigma_file, args.region_scales, manifest);

    CemSystem system(mesh, sigma);
    JacobianRecord record;
    record.jacobian = compute_jacobian(system, protocol);
    record.mesh_hash = mesh.content_hash();
    record.sigma_hash = conductivity_hash(sigma);
    record.protocol_hash = protocol.content_hash();

    std::string path = out_path(global, args.out);
    save_jacobian(record, path);
    manifest.add_output(path);

    if (args.rows) {
        for (int m = 0; m < record.jacobian.rows(); ++m) {
            std::string row_path =
                out_path(global, "sensitivity_row" + std::to_string(m) + ".csv");
            save_reconstruction(sensitivity_map(record.jacobian, m), row_path);
            manifest.add_output(row_path);
        }
    }
    if (args.hex_voxel > 0.0) {
        HexAggregation hex = aggregate_to_hex(mesh, record.jacobian, args.hex_voxel);
        std::string hex_path = out_path(global, "jacobian_hex.csv");
        std::ofstream out(hex_path, std::ios::binary);
        if (!out) throw ValidationError("cannot write '" + hex_path + "'");
        out << "# EITHEXJAC 1\nvoxel,center_x,center_y,center_z,volume";
        for (int m = 0; m < hex.jacobian.rows(); ++m) out << ",m" << m;
        out << '\n';
        for (int v = 0; v < static_cast<int>(hex.centers.size()); ++v) {
            out << v << ',' << format_double(hex.centers[v].x()) << ','
                << format_double(hex.centers[v].y()) << ','
                << format_double(hex.centers[v].z()) << ',' << format_double(hex.volumes[v]);
            for (int m = 0; m < hex.jacobian.rows(); ++m)
                out << ',' << format_double(hex.jacobian(m, v));
            out << '\n';
        }
        manifest.add_output(hex_path);
        manifest.parameters["hex_voxels"] = std::to_string(hex.centers.size());
    }

    manifest.parameters["rows"] = std::to_string(record.jacobian.rows());
    manifest.parameters["columns"] = std::to_string(record.jacobian.cols());
    finish_manifest(manifest, global);
    std::cout << "jacobian: " << record.jacobian.rows() << " x " << record.jacobian.cols()
              << " -> " << path << "\n";
    return 0;
}

struct ReconstructArgs {
    std::string jacobian;
    std::string dv;
    double lambda = -1.0;
    double cv_noise_std = 0.0;
    int cv_perturbations = 20;
    std::string mesh;  // optional, for the VTK viewer export
    std::string out = "reconstruction.csv";
    std::string vtk;
};

int cmd_reconstruct(const GlobalArgs& global, const ReconstructArgs& args) {
    RunManifest manifest = start_manifest(global, "reconstruct");
    manifest.add_input(args.jacobian);
    JacobianRecord record = load_jacobian(args.jacobian);
    manifest.add_input(args.dv);
    Eigen::VectorXd dv = read_voltages(args.dv);

    double lambda = args.lambda;
    if (lambda <= 0.0) {
        CvResult cv =
            select_lambda_cv(record.jacobian, default_lambda_grid(record.jacobian),
                             args.cv_noise_std, args.cv_perturbations,
                             derive_seed(global.seed, "cv"));
        lambda = cv.best_lambda;
        manifest.parameters["lambda_source"] = "cross-validation";
    } else {
        manifest.parameters["lambda_source"] = "explicit";
    }

    ReconstructionResult result = reconstruct(record.jacobian, dv, lambda);
    manifest.parameters["lambda"] = format_double(lambda);
    manifest.parameters["residual"] = format_double(result.residual);

    std::string path = out_path(global, args.out);
    save_reconstruction(result.delta_sigma, path);
    manifest.add_output(path);

    if (!args.vtk.empty()) {
        if (args.mesh.empty())
            throw ValidationError("--vtk needs --mesh to supply the geometry");
        manifest.add_input(args.mesh);
        Mesh mesh = load_mesh(args.mesh);
        if (mesh.element_count() != result.delta_sigma.size())
            throw ValidationError("mesh does not match the reconstruction size");
        std::string vtk = out_path(global, args.vtk);
        export_vtk(mesh, vtk, result.delta_sigma, "delta_sigma");
        manifest.add_output(vtk);
    }
    finish_manifest(manifest, global);
    std::cout << "reconstruct: lambda " << format_double(lambda) << ", residual "
              << format_double(result.residual) << " -> " << path << "\n";
    return 0;
}

struct FdmArgs {
    std::string protocol = "builtin:hinged";
    std::string amplitudes;
    double sample_rate = 50e3;
    double window = 20e-3;
    double snr_db = -1.0;      // <= 0: use explicit noise std
    double noise_std = 0.0;
    bool quantize = false;
    int repeats = 1;
    bool keep_series = false;
    std::string frames_out = "frames.csv";
};

int cmd_fdm(const GlobalArgs& global, const FdmArgs& args) {
    RunManifest manifest = start_manifest(global, "fdm");
    Protocol protocol = protocol_from_source(args.protocol, manifest);
    protocol.validate(1 << 20);  // electrode ids unconstrained without a mesh
    if (args.amplitudes.empty())
        throw ValidationError("fdm needs --amplitudes (a forward voltage CSV)");
    manifest.add_input(args.amplitudes);
    Eigen::VectorXd amplitudes = read_voltages(args.amplitudes);
    if (args.repeats < 1) throw ValidationError("--repeats must be at least 1");

    std::vector<double> frequencies;
    for (const Injection& inj : protocol.injections) frequencies.push_back(inj.frequency);
    OrthogonalityReport report = check_orthogonality(frequencies, args.window, args.sample_rate);
    if (!report.ok)
        throw ValidationError("window is not orthogonal for this protocol: " + report.detail);

    NoiseModel noise;
    noise.quantize = args.quantize;
    int samples = static_cast<int>(std::round(args.sample_rate * args.window));
    if (args.snr_db > 0.0) {
        double mean_amp = amplitudes.cwiseAbs().mean();
        noise.std_volts = noise_std_for_snr(mean_amp, samples, args.snr_db);
    } else {
        noise.std_volts = args.noise_std;
    }

    std::vector<double> timestamps;
    std::vector<VoltageFrame> frames;
    for (int r = 0; r < args.repeats; ++r) {
        TimeSeries series =
            synthesize_frame(protocol, amplitudes, args.sample_rate, args.window, noise,
                             derive_seed(global.seed, "fdm-frame", r));
        if (r == 0 && args.keep_series) {
            std::string ts_path = out_path(global, "frame0.eitts");
            save_timeseries(series, ts_path);
            manifest.add_output(ts_path);
        }
        timestamps.push_back(r * args.window);
        frames.push_back(demodulate_frame(series, protocol));
    }

    std::string frames_path = out_path(global, args.frames_out);
    save_frames(timestamps, frames, protocol, frames_path);
    manifest.add_output(frames_path);

    if (static_cast<int>(frames.size()) >= 10) {
        Eigen::VectorXd snr = compute_snr(frames);
        std::string snr_path = out_path(global, "snr.csv");
        std::ofstream out(snr_path, std::ios::binary);
        if (!out) throw ValidationError("cannot write '" + snr_path + "'");
        out << "# EITSNR 1\nmeasurement,snr_db\n";
        for (int m = 0; m < snr.size(); ++m)
            out << m << ',' << format_double(snr[m]) << '\n';
        out.close();
        manifest.add_output(snr_path);
    }

    manifest.parameters["worst_leakage_db"] = format_double(report.worst_leakage_db);
    manifest.parameters["noise_std"] = format_double(noise.std_volts);
    manifest.parameters["repeats"] = std::to_string(args.repeats);
    finish_manifest(manifest, global);
    std::cout << "fdm: " << args.repeats << " frame(s), worst leakage "
              << format_double(report.worst_leakage_db) << " dB -> " << frames_path << "\n";
    return 0;
}

struct ScenarioArgs {
    std::string config;
};

int cmd_scenario(const GlobalArgs& global, const ScenarioArgs& args) {
    RunManifest manifest = start_manifest(global, "scenario");
    manifest.add_input(args.config);
    ScenarioConfig config = ScenarioConfig::load(args.config);
    if (config.seed == 0) config.seed = global.seed;
    config.out_dir = global.out_dir;

    std::string summary = run_scenario(config);
    std::cout << summary;

    manifest.parameters["kind"] = config.kind;
    manifest.add_output(out_path(global, "summary.txt"));
    finish_manifest(manifest, global);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    GlobalArgs global;
    for (int i = 0; i < argc; ++i) global.command_line.emplace_back(argv[i]);

    CLI::App app{"EIT shape-sensing toolkit: meshing, CEM forward solves, sensitivity, "
                 "Tikhonov reconstruction and the FDM signal chain"};
    app.require_subcommand(1);
    app.add_option("--seed", global.seed, "Base seed for every random stream")
        ->capture_default_str();
    app.add_option("--threads", global.threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
    app.add_option("--out-dir", global.out_dir, "Directory for outputs and manifests")
        ->capture_default_str();

    MeshArgs mesh_args;
    CLI::App* mesh = app.add_subcommand("mesh", "Generate, refine or convert a mesh");
    mesh->add_option("kind", mesh_args.kind, "hinged, finger or box")->capture_default_str();
    mesh->add_option("--input", mesh_args.input, "Refine an existing mesh file instead");
    mesh->add_option("--lengths", mesh_args.lengths, "Box dimensions, mm")->expected(2, 3);
    mesh->add_option("--edge", mesh_args.edge, "Target edge length, mm")->capture_default_str();
    mesh->add_option("--electrode-size", mesh_args.electrode_size, "Patch edge, mm")
        ->capture_default_str();
    mesh->add_option("--impedance", mesh_args.impedance, "Contact impedance, Ohm*m^2")
        ->capture_default_str();
    mesh->add_option("--refine", mesh_args.refine, "Uniform refinement passes")
        ->capture_default_str();
    mesh->add_option("--refine-radius", mesh_args.refine_radius,
                     "Bisect elements within this distance of an electrode, mm");
    mesh->add_option("--refine-factor", mesh_args.refine_factor,
                     "Target size reduction for --refine-radius")
        ->capture_default_str();
    mesh->add_option("--out", mesh_args.out, "Output mesh file name")->capture_default_str();
    mesh->add_option("--vtk", mesh_args.vtk, "Also export a VTK file with region tags");

    ForwardArgs forward_args;
    CLI::App* forward = app.add_subcommand("forward", "Solve the forward problem");
    forward->add_option("--mesh", forward_args.mesh, "Mesh file or builtin:hinged/finger")
        ->capture_default_str();
    forward
        ->add_option("--protocol", forward_args.protocol,
                     "Protocol file or builtin:hinged/finger")
        ->capture_default_str();
    forward->add_option("--sigma", forward_args.sigma, "Uniform conductivity, S/m")
        ->capture_default_str();
    forward->add_option("--sigma-file", forward_args.sigma_file,
                        "Per-element conductivity CSV (element_id,value)");
    forward->add_option("--scale-region", forward_args.region_scales,
                        "Multiply a tagged region, TAG:FACTOR (repeatable)");
    forward->add_option("--out", forward_args.out, "Voltage CSV name")->capture_default_str();

    JacobianArgs jacobian_args;
    CLI::App* jacobian = app.add_subcommand("jacobian", "Compute the sensitivity matrix");
    jacobian->add_option("--mesh", jacobian_args.mesh, "Mesh file or builtin:hinged/finger")
        ->capture_default_str();
    jacobian
        ->add_option("--protocol", jacobian_args.protocol,
                     "Protocol file or builtin:hinged/finger")
        ->capture_default_str();
    jacobian->add_option("--sigma", jacobian_args.sigma, "Uniform conductivity, S/m")
        ->capture_default_str();
    jacobian->add_option("--sigma-file", jacobian_args.sigma_file,
                         "Per-element conductivity CSV");
    jacobian->add_option("--scale-region", jacobian_args.region_scales,
                         "Multiply a tagged region, TAG:FACTOR (repeatable)");
    jacobian->add_option("--hex", jacobian_args.hex_voxel,
                         "Also aggregate columns onto a hex grid of this pitch, mm");
    jacobian->add_flag("--rows", jacobian_args.rows,
                       "Export every row as a per-element sensitivity CSV");
    jacobian->add_option("--out", jacobian_args.out, "Jacobian file name")
        ->capture_default_str();

    ReconstructArgs reconstruct_args;
    CLI::App* reconstruct = app.add_subcommand("reconstruct", "Tikhonov difference image");
    reconstruct->add_option("--jacobian", reconstruct_args.jacobian, "EITJAC file")
        ->required();
    reconstruct->add_option("--dv", reconstruct_args.dv, "Voltage-change CSV")->required();
    reconstruct->add_option("--lambda", reconstruct_args.lambda,
                            "Regularization weight (<= 0 selects by cross-validation)");
    reconstruct->add_option("--cv-noise-std", reconstruct_args.cv_noise_std,
                            "Measurement noise std for cross-validation, V");
    reconstruct->add_option("--cv-perturbations", reconstruct_args.cv_perturbations,
                            "Synthetic perturbations per lambda")
        ->capture_default_str();
    reconstruct->add_option("--mesh", reconstruct_args.mesh, "Mesh file for --vtk");
    reconstruct->add_option("--out", reconstruct_args.out, "Reconstruction CSV name")
        ->capture_default_str();
    reconstruct->add_option("--vtk", reconstruct_args.vtk, "Viewer export name");

    FdmArgs fdm_args;
    CLI::App* fdm = app.add_subcommand("fdm", "Synthesize and demodulate FDM frames");
    fdm->add_option("--protocol", fdm_args.protocol, "Protocol file or builtin:hinged")
        ->capture_default_str();
    fdm->add_option("--amplitudes", fdm_args.amplitudes, "Forward voltage CSV")->required();
    fdm->add_option("--sample-rate", fdm_args.sample_rate, "Hz")->capture_default_str();
    fdm->add_option("--window", fdm_args.window, "Frame length, s")->capture_default_str();
    fdm->add_option("--snr", fdm_args.snr_db,
                    "Calibrate noise to this demodulated SNR (dB) at the mean amplitude");
    fdm->add_option("--noise-std", fdm_args.noise_std, "Explicit sample noise std, V");
    fdm->add_flag("--quantize", fdm_args.quantize, "Round samples to a 16-bit DAQ grid");
    fdm->add_option("--repeats", fdm_args.repeats, "Number of frames")->capture_default_str();
    fdm->add_flag("--keep-series", fdm_args.keep_series, "Also write the first raw frame");
    fdm->add_option("--frames-out", fdm_args.frames_out, "Frame CSV name")
        ->capture_default_str();

    ScenarioArgs scenario_args;
    CLI::App* scenario = app.add_subcommand("scenario", "Run a declarative experiment config");
    scenario->add_option("config", scenario_args.config, "Scenario config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[validation]: " << e.what() << "\n";
        return 1;
    }

    try {
        set_thread_count(global.threads);
        if (mesh->parsed()) return cmd_mesh(global, mesh_args);
        if (forward->parsed()) return cmd_forward(global, forward_args);
        if (jacobian->parsed()) return cmd_jacobian(global, jacobian_args);
        if (reconstruct->parsed()) return cmd_reconstruct(global, reconstruct_args);
        if (fdm->parsed()) return cmd_fdm(global, fdm_args);
        if (scenario->parsed()) return cmd_scenario(global, scenario_args);
        std::cerr << "error[validation]: no subcommand given\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error[validation]: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "error[numeric]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 2;
    }
}
