#include "eitsense/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "eitsense/errors.hpp"
#include "eitsense/fem.hpp"
#include "eitsense/inverse.hpp"
#include "eitsense/io_util.hpp"
#include "eitsense/jacobian.hpp"
#include "eitsense/mesh_io.hpp"
#include "eitsense/version.hpp"

namespace eitsense {

namespace {

std::uint64_t effective_seed(const ScenarioConfig& config) {
    return config.seed != 0 ? config.seed : kDefaultSeed;
}

Mesh resolve_mesh(const std::string& source) {
    if (source == "builtin:hinged") return generate_hinged_actuator_mesh();
    if (source == "builtin:finger") return generate_finger_chamber_mesh();
    return load_mesh(source);
}

Protocol resolve_protocol(const std::string& source) {
    if (source == "builtin:hinged") return make_hinged_protocol();
    if (source == "builtin:finger") return make_finger_protocol(2e3);
    return Protocol::load(source);
}

// Physical channels in the order synthesize_frame assigns them (first seen).
std::vector<std::pair<int, int>> channel_pairs_of(const Protocol& protocol) {
    std::vector<std::pair<int, int>> pairs;
    for (const Injection& inj : protocol.injections)
        for (const auto& pair : inj.measurements)
            if (std::find(pairs.begin(), pairs.end(), pair) == pairs.end())
                pairs.push_back(pair);
    return pairs;
}

// Noise floor per physical channel, calibrated so the channel's mean carrier
// amplitude demodulates at the configured SNR. The floor is fixed from the
// rest-state amplitudes so it does not drift with actuator state.
NoiseModel calibrated_noise(const ScenarioConfig& config, const Protocol& protocol,
                            const Eigen::VectorXd& rest_measurements) {
    NoiseModel noise;
    if (config.noiseless) return noise;  // zero std, no quantization
    noise.quantize = config.quantize;

    std::vector<std::pair<int, int>> pairs = channel_pairs_of(protocol);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pairs.size()));
    Eigen::VectorXd count = Eigen::VectorXd::Zero(sum.size());
    int m = 0;
    for (const Injection& inj : protocol.injections)
        for (const auto& pair : inj.measurements) {
            auto at = std::find(pairs.begin(), pairs.end(), pair) - pairs.begin();
            sum[at] += std::abs(rest_measurements[m++]);
            count[at] += 1.0;
        }

    int samples = static_cast<int>(std::round(config.sample_rate * config.window));
    double overall = sum.sum() / std::max(1.0, count.sum());
    Eigen::VectorXd std_per_channel(sum.size());
    for (Eigen::Index c = 0; c < sum.size(); ++c) {
        double amp = count[c] > 0.0 ? sum[c] / count[c] : 0.0;
        if (amp <= 0.0) amp = overall;
        std_per_channel[c] =
            amp > 0.0 ? noise_std_for_snr(amp, samples, config.snr_db) : 0.0;
    }
    noise.per_channel_std = std_per_channel;
    return noise;
}

void require_timing(const ScenarioConfig& config) {
    if (!(config.sample_rate > 0.0) || !(config.window > 0.0))
        throw ValidationError("sample rate and window must be positive");
    if (config.frames_per_state < 1)
        throw ValidationError("frames_per_state must be at least 1");
}

std::filesystem::path ensure_out_dir(const std::string& out_dir) {
    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    return out;
}

// Least-squares line fit quality of y against x.
double r_squared(const std::vector<double>& x, const Eigen::VectorXd& y) {
    int n = static_cast<int>(x.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (syy == 0.0) return 1.0;  // constant channel: any line through it fits
    if (sxx == 0.0) return 0.0;
    return sxy * sxy / (sxx * syy);
}

// Peak voltage change per injection between two measurement vectors,
// restricted to the injection's own flat measurements.
double injection_response(const Protocol& protocol, int injection,
                          const Eigen::VectorXd& delta) {
    int m = 0;
    double peak = 0.0;
    for (int j = 0; j < static_cast<int>(protocol.injections.size()); ++j)
        for (std::size_t k = 0; k < protocol.injections[j].measurements.size(); ++k, ++m)
            if (j == injection) peak = std::max(peak, std::abs(delta[m]));
    return peak;
}

int find_injection(const Protocol& protocol, int a, int b) {
    for (int j = 0; j < static_cast<int>(protocol.injections.size()); ++j) {
        const Injection& inj = protocol.injections[j];
        if ((inj.source == a && inj.sink == b) || (inj.source == b && inj.sink == a)) return j;
    }
    return -1;
}

bool has_region(const Mesh& mesh, int tag) {
    return std::find(mesh.region_tags.begin(), mesh.region_tags.end(), tag) !=
           mesh.region_tags.end();
}

}  // namespace

double HingeResponse::factor(double theta_deg) const {
    if (form == Form::Monotone) return 1.0 / (1.0 + slope * theta_deg / 90.0);
    // Knee: slack film lets conductance rise a little before the neck takes
    // over; both branches meet at the knee with zero slope.
    if (theta_deg <= knee_deg) {
        double s = std::sin(std::numbers::pi * theta_deg / (2.0 * knee_deg));
        return 1.0 + rise * s * s;
    }
    double t = (theta_deg - knee_deg) / (90.0 - knee_deg);
    return (1.0 + rise) - (1.0 + rise - end_value) * t * t;
}

double HingeResponse::chamber_factor(double theta_deg) const {
    return 1.0 - chamber_gain * theta_deg / 90.0;
}

ActuatorModel ActuatorModel::defaults() {
    ActuatorModel model;
    model.hinge1.form = HingeResponse::Form::Knee;
    model.hinge2.form = HingeResponse::Form::Monotone;
    return model;
}

Conductivity bend_to_conductivity(const Mesh& mesh, const ActuatorModel& model,
                                  const BendState& state) {
    if (state.hinge1_deg < 0.0 || state.hinge1_deg > 90.0 || state.hinge2_deg < 0.0 ||
        state.hinge2_deg > 90.0)
        throw ValidationError("bend angles must lie in [0, 90] degrees");
    if (!has_region(mesh, hinge_tag(1)) && !has_region(mesh, hinge_tag(2)))
        throw ValidationError("mesh has no hinge region tags; cannot map bend state");
    if (!(model.baseline_sigma > 0.0))
        throw ValidationError("baseline conductivity must be positive");

    Conductivity sigma(mesh, model.baseline_sigma);
    sigma.scale_region(mesh, hinge_tag(1), model.hinge1.factor(state.hinge1_deg));
    sigma.scale_region(mesh, hinge_tag(2), model.hinge2.factor(state.hinge2_deg));
    // Each hinge leaks into its outer neighbour chamber; the middle chamber
    // stays at baseline, which is what keeps the two DOFs separable.
    sigma.scale_region(mesh, chamber_tag(1), model.hinge1.chamber_factor(state.hinge1_deg));
    sigma.scale_region(mesh, chamber_tag(3), model.hinge2.chamber_factor(state.hinge2_deg));
    return sigma;
}

double FingerModel::factor(double pressure_bar) const {
    if (pressure_bar < 0.0 || pressure_bar >= max_pressure)
        throw ValidationError("pressure must lie in [0, " + format_double(max_pressure) +
                              ") bar");
    return 1.0 / (1.0 + pressure_gain * pressure_bar);
}

// ---------------------------------------------------------------------------
// Config file

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    ConfigFile file = ConfigFile::load(path);
    ScenarioConfig config;
    config.kind = file.get_or("scenario", "kind", config.kind);
    config.mesh_source = file.get_or("scenario", "mesh", config.mesh_source);
    config.protocol_source = file.get_or("scenario", "protocol", config.protocol_source);
    config.sample_rate = file.get_double("scenario", "sample_rate", config.sample_rate);
    config.window = file.get_double("scenario", "window", config.window);
    config.frames_per_state =
        static_cast<int>(file.get_int("scenario", "frames_per_state", config.frames_per_state));
    config.snr_db = file.get_double("scenario", "snr_db", config.snr_db);
    config.noiseless = file.get_bool("scenario", "noiseless", config.noiseless);
    config.quantize = file.get_bool("scenario", "quantize", config.quantize);
    config.seed = static_cast<std::uint64_t>(
        file.get_int("scenario", "seed", static_cast<long long>(config.seed)));
    config.out_dir = file.get_or("scenario", "out_dir", config.out_dir);

    std::vector<double> h1 =
        file.has("sweep", "hinge1_deg") ? file.get_doubles("sweep", "hinge1_deg")
                                        : std::vector<double>{};
    std::vector<double> h2 =
        file.has("sweep", "hinge2_deg") ? file.get_doubles("sweep", "hinge2_deg")
                                        : std::vector<double>{};
    std::size_t states = std::max(h1.size(), h2.size());
    if (states > 0) {
        if (h1.size() > 1 && h2.size() > 1 && h1.size() != h2.size())
            throw ValidationError("hinge1_deg and hinge2_deg lists must have equal length "
                                  "(or length one to broadcast)");
        for (std::size_t i = 0; i < states; ++i) {
            BendState state;
            if (!h1.empty()) state.hinge1_deg = h1[h1.size() == 1 ? 0 : i];
            if (!h2.empty()) state.hinge2_deg = h2[h2.size() == 1 ? 0 : i];
            config.states.push_back(state);
        }
    }

    config.lambda = file.get_double("reconstruction", "lambda", config.lambda);
    config.cv_perturbations = static_cast<int>(
        file.get_int("reconstruction", "cv_perturbations", config.cv_perturbations));
    config.hex_voxel_mm =
        file.get_double("reconstruction", "hex_voxel_mm", config.hex_voxel_mm);

    if (file.has("phantom", "resistances"))
        config.resistances = file.get_doubles("phantom", "resistances");
    if (file.has("phantom", "frequencies"))
        config.frequencies = file.get_doubles("phantom", "frequencies");
    config.amplitude = file.get_double("phantom", "amplitude", config.amplitude);
    config.phantom_frames =
        static_cast<int>(file.get_int("phantom", "frames", config.phantom_frames));

    if (file.has("finger", "pressures")) config.pressures = file.get_doubles("finger", "pressures");
    config.finger.baseline_sigma =
        file.get_double("finger", "baseline_sigma", config.finger.baseline_sigma);
    config.finger.pressure_gain =
        file.get_double("finger", "pressure_gain", config.finger.pressure_gain);
    config.finger.max_pressure =
        file.get_double("finger", "max_pressure", config.finger.max_pressure);

    config.actuator.baseline_sigma =
        file.get_double("actuator", "baseline_sigma", config.actuator.baseline_sigma);
    auto load_hinge = [&](const std::string& prefix, HingeResponse& hinge) {
        std::string form = file.get_or("actuator", prefix + "_form",
                                       hinge.form == HingeResponse::Form::Knee ? "knee"
                                                                                : "monotone");
        if (form == "knee") hinge.form = HingeResponse::Form::Knee;
        else if (form == "monotone") hinge.form = HingeResponse::Form::Monotone;
        else throw ValidationError("unknown hinge response form '" + form + "'");
        hinge.knee_deg = file.get_double("actuator", prefix + "_knee_deg", hinge.knee_deg);
        hinge.rise = file.get_double("actuator", prefix + "_rise", hinge.rise);
        hinge.end_value = file.get_double("actuator", prefix + "_end_value", hinge.end_value);
        hinge.slope = file.get_double("actuator", prefix + "_slope", hinge.slope);
        hinge.chamber_gain =
            file.get_double("actuator", prefix + "_chamber_gain", hinge.chamber_gain);
    };
    load_hinge("hinge1", config.actuator.hinge1);
    load_hinge("hinge2", config.actuator.hinge2);
    return config;
}

// ---------------------------------------------------------------------------
// Static sweep

SweepResult run_static_sweep(const ScenarioConfig& config) {
    require_timing(config);
    if (config.states.empty()) throw ValidationError("sweep has no bend states");

    Mesh mesh = resolve_mesh(config.mesh_source);
    Protocol protocol = resolve_protocol(config.protocol_source);
    protocol.validate(mesh);
    std::uint64_t seed = effective_seed(config);

    SweepResult result;
    result.states = config.states;
    result.protocol = protocol;
    int count = protocol.measurement_count();
    result.voltages.resize(static_cast<Eigen::Index>(config.states.size()), count);

    CemSystem system(mesh, bend_to_conductivity(mesh, config.actuator, BendState{}));
    Eigen::VectorXd rest_v = system.forward(protocol).measurements;
    NoiseModel clean;
    result.baseline = demodulate_frame(synthesize_frame(protocol, rest_v, config.sample_rate,
                                                        config.window, clean, 0),
                                       protocol)
                          .in_phase();
    NoiseModel noise = calibrated_noise(config, protocol, rest_v);

    std::vector<double> timestamps;
    std::vector<VoltageFrame> frames;
    for (std::size_t i = 0; i < config.states.size(); ++i) {
        system.update_conductivity(bend_to_conductivity(mesh, config.actuator,
                                                        config.states[i]));
        Eigen::VectorXd v = system.forward(protocol).measurements;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(count);
        for (int r = 0; r < config.frames_per_state; ++r) {
            std::uint64_t frame_seed = derive_seed(
                seed, "sweep-frame",
                static_cast<std::uint64_t>(i) * config.frames_per_state + r);
            TimeSeries series = synthesize_frame(protocol, v, config.sample_rate,
                                                 config.window, noise, frame_seed);
            VoltageFrame frame = demodulate_frame(series, protocol);
            timestamps.push_back(static_cast<double>(frames.size()) * config.window);
            frames.push_back(frame);
            mean += frame.in_phase();
        }
        result.voltages.row(static_cast<Eigen::Index>(i)) =
            (mean / config.frames_per_state).transpose();
    }

    // Trend statistics against whichever hinge actually moves.
    bool hinge1_moves = false;
    for (const BendState& s : config.states)
        hinge1_moves = hinge1_moves || s.hinge1_deg != config.states[0].hinge1_deg;
    std::vector<double> angles;
    for (const BendState& s : config.states)
        angles.push_back(hinge1_moves ? s.hinge1_deg : s.hinge2_deg);

    int state_count = static_cast<int>(config.states.size());
    for (int m = 0; m < count; ++m) {
        Eigen::VectorXd y = result.voltages.col(m);
        ChannelTrend trend;
        trend.r2_linear = state_count >= 2 ? r_squared(angles, y) : 1.0;
        bool increasing = true, decreasing = true;
        for (int i = 1; i < state_count; ++i) {
            increasing = increasing && y[i] > y[i - 1];
            decreasing = decreasing && y[i] < y[i - 1];
        }
        trend.monotone = state_count >= 2 && (increasing || decreasing);
        int peak = 0;
        for (int i = 1; i < state_count; ++i)
            if (std::abs(y[i] - y[0]) > std::abs(y[peak] - y[0])) peak = i;
        trend.peak_angle = angles[peak];
        trend.range_mv = (y.maxCoeff() - y.minCoeff()) * 1e3;
        result.trends.push_back(trend);
    }

    if (!config.out_dir.empty()) {
        std::filesystem::path dir = ensure_out_dir(config.out_dir);
        save_frames(timestamps, frames, protocol, (dir / "frames.csv").string());
        std::ofstream out = open_output(dir / "voltages.csv");
        out << "# EITSWEEP 1\nhinge1_deg,hinge2_deg";
        for (int m = 0; m < count; ++m) out << ",m" << m;
        out << '\n';
        for (int i = 0; i < state_count; ++i) {
            out << format_double(config.states[i].hinge1_deg) << ','
                << format_double(config.states[i].hinge2_deg);
            for (int m = 0; m < count; ++m) out << ',' << format_double(result.voltages(i, m));
            out << '\n';
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Resistor phantom

PhantomResult run_resistor_phantom(const ScenarioConfig& config) {
    require_timing(config);
    if (config.resistances.empty()) throw ValidationError("phantom needs at least one resistor");
    for (double r : config.resistances)
        if (!(r > 0.0)) throw ValidationError("resistive loads must be positive");
    if (config.frequencies.empty()) throw ValidationError("phantom needs carrier frequencies");
    if (!(config.amplitude > 0.0)) throw ValidationError("drive amplitude must be positive");
    if (config.phantom_frames < 1) throw ValidationError("phantom needs at least one frame");

    int channels = static_cast<int>(config.resistances.size());
    int carriers = static_cast<int>(config.frequencies.size());
    std::uint64_t seed = effective_seed(config);

    // Pure Ohmic bench: every carrier drives every resistor channel, V = I*R
    // independent of frequency. Electrode ids are synthetic (one pair per
    // resistor).
    Protocol protocol;
    for (int j = 0; j < carriers; ++j) {
        Injection inj;
        inj.source = 1;
        inj.sink = 2;
        inj.amplitude = config.amplitude;
        inj.frequency = config.frequencies[j];
        for (int c = 0; c < channels; ++c) inj.measurements.emplace_back(2 * c + 1, 2 * c + 2);
        protocol.injections.push_back(inj);
    }
    protocol.validate(2 * channels);

    Eigen::VectorXd truth(carriers * channels);
    for (int j = 0; j < carriers; ++j)
        for (int c = 0; c < channels; ++c)
            truth[j * channels + c] = config.amplitude * config.resistances[c];

    NoiseModel noise;
    if (!config.noiseless) {
        noise.quantize = config.quantize;
        int samples = static_cast<int>(std::round(config.sample_rate * config.window));
        Eigen::VectorXd per_channel(channels);
        for (int c = 0; c < channels; ++c)
            per_channel[c] = noise_std_for_snr(config.amplitude * config.resistances[c],
                                               samples, config.snr_db);
        noise.per_channel_std = per_channel;
    }

    std::vector<VoltageFrame> frames;
    for (int f = 0; f < config.phantom_frames; ++f) {
        TimeSeries series =
            synthesize_frame(protocol, truth, config.sample_rate, config.window, noise,
                             derive_seed(seed, "phantom-frame", f));
        frames.push_back(demodulate_frame(series, protocol));
    }

    PhantomResult result;
    result.frequencies = config.frequencies;
    result.resistances = config.resistances;
    result.mean_voltage = Eigen::MatrixXd::Zero(channels, carriers);
    for (const VoltageFrame& frame : frames) {
        Eigen::VectorXd v = frame.in_phase();
        for (int j = 0; j < carriers; ++j)
            for (int c = 0; c < channels; ++c) result.mean_voltage(c, j) += v[j * channels + c];
    }
    result.mean_voltage /= static_cast<double>(frames.size());

    result.snr_db.resize(0, 0);
    if (static_cast<int>(frames.size()) >= 10) {
        Eigen::VectorXd snr = compute_snr(frames);
        result.snr_db.resize(channels, carriers);
        for (int j = 0; j < carriers; ++j)
            for (int c = 0; c < channels; ++c) result.snr_db(c, j) = snr[j * channels + c];
    }

    result.frequency_spread.resize(channels);
    for (int c = 0; c < channels; ++c) {
        double lo = result.mean_voltage.row(c).minCoeff();
        double hi = result.mean_voltage.row(c).maxCoeff();
        double mid = result.mean_voltage.row(c).mean();
        result.frequency_spread[c] = mid != 0.0 ? (hi - lo) / std::abs(mid) : 0.0;
    }

    if (!config.out_dir.empty()) {
        std::filesystem::path dir = ensure_out_dir(config.out_dir);
        std::ofstream out = open_output(dir / "phantom.csv");
        out << "# EITPHANTOM 1\nresistance_ohm";
        for (double f : config.frequencies) out << ",mean_v_at_" << format_double(f) << "hz";
        out << ",spread\n";
        for (int c = 0; c < channels; ++c) {
            out << format_double(config.resistances[c]);
            for (int j = 0; j < carriers; ++j) out << ',' << format_double(result.mean_voltage(c, j));
            out << ',' << format_double(result.frequency_spread[c]) << '\n';
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Localization experiment

namespace {

// Geometry of one composite experiment: element centroids/volumes/tags over
// one or two chambers, plus the block Jacobian and baseline measurements.
struct ExperimentRig {
    std::vector<std::unique_ptr<CemSystem>> systems;
    std::vector<Mesh> meshes;
    std::vector<Eigen::Vector3d> offsets;     // per mesh, mm
    std::vector<Protocol> protocols;          // per mesh (local electrode ids)
    Protocol composite;                       // for synthesis/demodulation
    Eigen::MatrixXd jacobian;                 // composite, block-diagonal
    Eigen::VectorXd baseline;                 // composite measurements
    std::vector<int> element_mesh;            // composite element -> mesh
    std::vector<int> element_local;           // composite element -> local index
    std::vector<int> tags;                    // composite element tags
    std::vector<int> chambers;                // distinct chamber tags, sorted

    Eigen::VectorXd forward_all() {
        Eigen::VectorXd v(baseline.size());
        Eigen::Index at = 0;
        for (std::size_t s = 0; s < systems.size(); ++s) {
            Eigen::VectorXd part = systems[s]->forward(protocols[s]).measurements;
            v.segment(at, part.size()) = part;
            at += part.size();
        }
        return v;
    }

    Eigen::Vector3d centroid_of(int composite_element) const {
        int s = element_mesh[composite_element];
        return meshes[s].element_centroid(element_local[composite_element]) + offsets[s];
    }
    double volume_of(int composite_element) const {
        int s = element_mesh[composite_element];
        return std::abs(meshes[s].element_volume(element_local[composite_element]));
    }
    int region_of(const Eigen::Vector3d& p) const {
        // Attribute the point to the nearest mesh bounding box, then resolve
        // inside that mesh.
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < meshes.size(); ++s) {
            Eigen::Vector3d local = p - offsets[s];
            Eigen::Vector3d lo = meshes[s].bbox_min(), hi = meshes[s].bbox_max();
            Eigen::Vector3d clamped = local.cwiseMax(lo).cwiseMin(hi);
            double d = (local - clamped).norm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(s);
            }
        }
        return meshes[best].region_of_point(p - offsets[best]);
    }
};

ExperimentRig build_hinged_rig(const ScenarioConfig& config) {
    ExperimentRig rig;
    rig.meshes.push_back(resolve_mesh(config.mesh_source));
    rig.offsets.push_back(Eigen::Vector3d::Zero());
    Protocol protocol = resolve_protocol(config.protocol_source);
    protocol.validate(rig.meshes[0]);
    rig.protocols.push_back(protocol);
    rig.composite = protocol;

    const Mesh& mesh = rig.meshes[0];
    rig.systems.push_back(std::make_unique<CemSystem>(
        mesh, Conductivity(mesh, config.actuator.baseline_sigma)));
    rig.baseline = rig.systems[0]->forward(protocol).measurements;
    rig.jacobian = compute_jacobian(*rig.systems[0], protocol);

    for (int e = 0; e < mesh.element_count(); ++e) {
        rig.element_mesh.push_back(0);
        rig.element_local.push_back(e);
        rig.tags.push_back(mesh.region_tags[e]);
    }
    return rig;
}

// Two independent finger chambers sharing one acquisition window: the
// composite Jacobian is block-diagonal because no current path couples them.
ExperimentRig build_finger_rig(const ScenarioConfig& config) {
    ExperimentRig rig;
    FingerChamberParams params;
    double gap = 15.0;
    std::vector<double> carriers{2e3, 12e3};
    for (int s = 0; s < 2; ++s) {
        params.region_tag = chamber_tag(s + 1);
        Mesh mesh = generate_finger_chamber_mesh(params);
        rig.offsets.emplace_back(s * (params.length + gap), 0.0, 0.0);
        Protocol protocol = make_finger_protocol(carriers[s]);
        protocol.validate(mesh);
        rig.meshes.push_back(std::move(mesh));
        rig.protocols.push_back(protocol);
    }

    std::vector<Eigen::MatrixXd> blocks;
    std::vector<Eigen::VectorXd> parts;
    for (int s = 0; s < 2; ++s) {
        const Mesh& mesh = rig.meshes[s];
        rig.systems.push_back(std::make_unique<CemSystem>(
            mesh, Conductivity(mesh, config.finger.baseline_sigma)));
        parts.push_back(rig.systems[s]->forward(rig.protocols[s]).measurements);
        blocks.push_back(compute_jacobian(*rig.systems[s], rig.protocols[s]));
        for (int e = 0; e < mesh.element_count(); ++e) {
            rig.element_mesh.push_back(s);
            rig.element_local.push_back(e);
            rig.tags.push_back(mesh.region_tags[e]);
        }

        // Composite protocol with disjoint electrode ids (chamber 2 maps to
        // ids 3/4) so both carriers share one synthesized frame.
        Injection inj = rig.protocols[s].injections[0];
        inj.source += 2 * s;
        inj.sink += 2 * s;
        for (auto& pair : inj.measurements) {
            pair.first += 2 * s;
            pair.second += 2 * s;
        }
        rig.composite.injections.push_back(inj);
    }

    Eigen::Index rows = 0, cols = 0;
    for (const auto& block : blocks) {
        rows += block.rows();
        cols += block.cols();
    }
    rig.jacobian = Eigen::MatrixXd::Zero(rows, cols);
    rig.baseline.resize(rows);
    Eigen::Index r = 0, c = 0;
    for (std::size_t s = 0; s < blocks.size(); ++s) {
        rig.jacobian.block(r, c, blocks[s].rows(), blocks[s].cols()) = blocks[s];
        rig.baseline.segment(r, parts[s].size()) = parts[s];
        r += blocks[s].rows();
        c += blocks[s].cols();
    }
    return rig;
}

}  // namespace

ReconstructionExperimentResult run_reconstruction_experiment(const ScenarioConfig& config) {
    require_timing(config);
    bool finger = config.mesh_source == "builtin:finger" ||
                  config.kind == "finger-localization";
    ExperimentRig rig = finger ? build_finger_rig(config) : build_hinged_rig(config);
    std::uint64_t seed = effective_seed(config);

    for (int tag : rig.tags)
        if (tag % 2 == 1 &&
            std::find(rig.chambers.begin(), rig.chambers.end(), tag) == rig.chambers.end())
            rig.chambers.push_back(tag);
    std::sort(rig.chambers.begin(), rig.chambers.end());
    if (rig.chambers.empty())
        throw ValidationError("mesh has no chamber region tags to perturb");

    ReconstructionExperimentResult result;
    int elements = static_cast<int>(rig.tags.size());

    // Measurement noise at the demodulated level, for CV calibration and the
    // synthetic frames alike.
    NoiseModel noise = calibrated_noise(config, rig.composite, rig.baseline);
    double demod_std = 0.0;
    if (!config.noiseless)
        demod_std = rig.baseline.cwiseAbs().mean() * std::pow(10.0, -config.snr_db / 20.0);

    if (config.lambda > 0.0) {
        result.lambda = config.lambda;
    } else {
        CvResult cv = select_lambda_cv(rig.jacobian, default_lambda_grid(rig.jacobian),
                                       demod_std, config.cv_perturbations,
                                       derive_seed(seed, "cv"));
        result.lambda = cv.best_lambda;
        result.lambda_from_cv = true;
    }
    ReconstructionOperator op = ReconstructionOperator::build(rig.jacobian, result.lambda);

    // One measured reference frame shared by every case (difference imaging
    // against a common baseline).
    auto measure = [&](const Eigen::VectorXd& v, std::uint64_t frame_seed) {
        if (config.noiseless) return v;
        TimeSeries series = synthesize_frame(rig.composite, v, config.sample_rate,
                                             config.window, noise, frame_seed);
        return demodulate_frame(series, rig.composite).in_phase().eval();
    };
    Eigen::VectorXd reference = measure(rig.baseline, derive_seed(seed, "reference"));

    int case_count = 10;
    result.reconstructions.resize(case_count, elements);
    std::mt19937_64 rng(derive_seed(seed, "cases"));
    std::uniform_int_distribution<int> pick_chamber(0,
                                                    static_cast<int>(rig.chambers.size()) - 1);
    std::uniform_real_distribution<double> magnitude(0.1, 0.3);
    std::bernoulli_distribution negate(0.5);

    double baseline_sigma = finger ? config.finger.baseline_sigma
                                   : config.actuator.baseline_sigma;
    for (int k = 0; k < case_count; ++k) {
        LocalizationCase c;
        c.true_region = rig.chambers[pick_chamber(rng)];
        double rel = magnitude(rng) * (negate(rng) ? -1.0 : 1.0);
        c.true_delta = baseline_sigma * rel;

        for (std::size_t s = 0; s < rig.systems.size(); ++s) {
            Conductivity sigma(rig.meshes[s], baseline_sigma);
            sigma.scale_region(rig.meshes[s], c.true_region, 1.0 + rel);
            rig.systems[s]->update_conductivity(sigma);
        }
        Eigen::VectorXd v = rig.forward_all();
        Eigen::VectorXd delta_v = measure(v, derive_seed(seed, "case-frame", k)) - reference;
        Eigen::VectorXd ds = op.apply(delta_v);
        result.reconstructions.row(k) = ds.transpose();

        // Volume-weighted centroid of the top decile of |ds|.
        std::vector<int> order(elements);
        for (int e = 0; e < elements; ++e) order[e] = e;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return std::abs(ds[a]) > std::abs(ds[b]); });
        int top = std::max(1, elements / 10);
        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        double mass = 0.0;
        for (int i = 0; i < top; ++i) {
            int e = order[i];
            double w = std::abs(ds[e]) * rig.volume_of(e);
            centroid += w * rig.centroid_of(e);
            mass += w;
        }
        if (mass > 0.0) centroid /= mass;
        c.centroid = centroid;
        c.hit_region = rig.region_of(centroid);
        c.hit = c.hit_region == c.true_region;

        // Image-space cross-talk: |ds| mass landing in the other chambers.
        double own = 0.0, others = 0.0;
        for (int e = 0; e < elements; ++e) {
            if (rig.tags[e] % 2 != 1) continue;
            double w = std::abs(ds[e]) * rig.volume_of(e);
            (rig.tags[e] == c.true_region ? own : others) += w;
        }
        c.cross_talk = own + others > 0.0 ? others / (own + others) : 0.0;
        result.cases.push_back(c);
    }

    // Voltage-level DOF isolation under single-DOF motion.
    if (!finger) {
        const Mesh& mesh = rig.meshes[0];
        const Protocol& protocol = rig.protocols[0];
        int inj_h1 = find_injection(protocol, 2, 3);
        int inj_h2 = find_injection(protocol, 4, 5);
        if (inj_h1 >= 0 && inj_h2 >= 0 && has_region(mesh, hinge_tag(1)) &&
            has_region(mesh, hinge_tag(2))) {
            auto response = [&](const BendState& state, int injection) {
                rig.systems[0]->update_conductivity(
                    bend_to_conductivity(mesh, config.actuator, state));
                Eigen::VectorXd delta = rig.systems[0]->forward(protocol).measurements -
                                        rig.baseline;
                return injection_response(protocol, injection, delta);
            };
            BendState bend1{90.0, 0.0}, bend2{0.0, 90.0};
            double r1 = response(bend1, inj_h1), r1_cross = response(bend1, inj_h2);
            double r2_cross = response(bend2, inj_h1), r2 = response(bend2, inj_h2);
            result.motion_cross_talk =
                std::max(r1 > 0.0 ? r1_cross / r1 : 0.0, r2 > 0.0 ? r2_cross / r2 : 0.0);
        }
    } else {
        // Chambers are electrically independent; pressurizing one is invisible
        // to the other, so the measured isolation is exactly the noise floor.
        Conductivity pressed(rig.meshes[0], config.finger.baseline_sigma *
                                                config.finger.factor(0.3));
        rig.systems[0]->update_conductivity(pressed);
        Eigen::VectorXd delta = rig.forward_all() - rig.baseline;
        double own = injection_response(rig.composite, 0, delta);
        double other = injection_response(rig.composite, 1, delta);
        result.motion_cross_talk = own > 0.0 ? other / own : 0.0;
    }

    if (!config.out_dir.empty()) {
        std::filesystem::path dir = ensure_out_dir(config.out_dir);
        for (int k = 0; k < case_count; ++k)
            save_reconstruction(result.reconstructions.row(k).transpose(),
                                (dir / ("reconstruction_case" + std::to_string(k) + ".csv"))
                                    .string());
        std::ofstream out = open_output(dir / "localization.csv");
        out << "# EITLOCAL 1\ncase,region,delta_sigma,centroid_x,centroid_y,centroid_z,"
               "hit_region,hit,cross_talk\n";
        for (int k = 0; k < case_count; ++k) {
            const LocalizationCase& c = result.cases[k];
            out << k << ',' << c.true_region << ',' << format_double(c.true_delta) << ','
                << format_double(c.centroid.x()) << ',' << format_double(c.centroid.y()) << ','
                << format_double(c.centroid.z()) << ',' << c.hit_region << ','
                << (c.hit ? 1 : 0) << ',' << format_double(c.cross_talk) << '\n';
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Finger demo

FingerResult run_finger_demo(const ScenarioConfig& config) {
    require_timing(config);
    std::vector<double> pressures = config.pressures;
    if (pressures.empty()) pressures = {0.0, 0.1, 0.2, 0.3, 0.4};
    std::uint64_t seed = effective_seed(config);

    FingerChamberParams params;
    double carriers[2] = {2e3, 12e3};
    std::vector<Mesh> meshes;
    meshes.reserve(2);  // systems hold references into this vector
    std::vector<std::unique_ptr<CemSystem>> systems;
    Protocol composite;
    for (int s = 0; s < 2; ++s) {
        params.region_tag = chamber_tag(s + 1);
        meshes.push_back(generate_finger_chamber_mesh(params));
        systems.push_back(std::make_unique<CemSystem>(
            meshes[s], Conductivity(meshes[s], config.finger.baseline_sigma)));
        Injection inj = make_finger_protocol(carriers[s]).injections[0];
        inj.source += 2 * s;
        inj.sink += 2 * s;
        for (auto& pair : inj.measurements) {
            pair.first += 2 * s;
            pair.second += 2 * s;
        }
        composite.injections.push_back(inj);
    }

    FingerResult result;
    result.pressures = pressures;
    result.carriers = {carriers[0], carriers[1]};
    result.voltages.resize(static_cast<Eigen::Index>(pressures.size()), 2);

    auto measurements_at = [&](double pressure) {
        Eigen::VectorXd v(2);
        for (int s = 0; s < 2; ++s) {
            Conductivity sigma(meshes[s],
                               config.finger.baseline_sigma * config.finger.factor(pressure));
            systems[s]->update_conductivity(sigma);
            v[s] = systems[s]->forward(
                make_finger_protocol(carriers[s])).measurements[0];
        }
        return v;
    };

    NoiseModel noise = calibrated_noise(config, composite, measurements_at(pressures[0]));
    for (std::size_t i = 0; i < pressures.size(); ++i) {
        Eigen::VectorXd v = measurements_at(pressures[i]);
        TimeSeries series = synthesize_frame(composite, v, config.sample_rate, config.window,
                                             noise, derive_seed(seed, "finger-frame", i));
        result.voltages.row(static_cast<Eigen::Index>(i)) =
            demodulate_frame(series, composite).in_phase().transpose();
    }

    if (!config.out_dir.empty()) {
        std::filesystem::path dir = ensure_out_dir(config.out_dir);
        std::ofstream out = open_output(dir / "finger.csv");
        out << "# EITFINGER 1\npressure_bar,chamber1_v,chamber2_v\n";
        for (std::size_t i = 0; i < pressures.size(); ++i)
            out << format_double(pressures[i]) << ',' << format_double(result.voltages(i, 0))
                << ',' << format_double(result.voltages(i, 1)) << '\n';
    }
    return result;
}

// ---------------------------------------------------------------------------
// Dispatch

std::string run_scenario(const ScenarioConfig& config) {
    std::ostringstream report;
    if (config.kind == "sweep") {
        SweepResult sweep = run_static_sweep(config);
        report << "static sweep: " << sweep.states.size() << " states, "
               << sweep.protocol.measurement_count() << " measurements\n";
        for (int m = 0; m < sweep.protocol.measurement_count(); ++m) {
            const ChannelTrend& t = sweep.trends[m];
            report << "  " << sweep.protocol.channel_label(m) << ": range "
                   << format_double(t.range_mv) << " mV, R2 " << format_double(t.r2_linear)
                   << (t.monotone ? ", monotone" : "") << ", peak at "
                   << format_double(t.peak_angle) << " deg\n";
        }
    } else if (config.kind == "phantom") {
        PhantomResult phantom = run_resistor_phantom(config);
        report << "resistor phantom: " << phantom.resistances.size() << " loads, "
               << phantom.frequencies.size() << " carriers, " << config.phantom_frames
               << " frames\n";
        for (std::size_t c = 0; c < phantom.resistances.size(); ++c) {
            report << "  " << format_double(phantom.resistances[c]) << " ohm: mean load "
                   << format_double(phantom.mean_voltage.row(c).mean() / config.amplitude)
                   << " ohm, spread across carriers "
                   << format_double(phantom.frequency_spread[c] * 100.0) << " %";
            if (phantom.snr_db.size() > 0)
                report << ", SNR " << format_double(phantom.snr_db.row(c).mean()) << " dB";
            report << '\n';
        }
    } else if (config.kind == "reconstruction" || config.kind == "finger-localization") {
        ReconstructionExperimentResult rec = run_reconstruction_experiment(config);
        int hits = 0;
        for (const LocalizationCase& c : rec.cases) hits += c.hit ? 1 : 0;
        report << "localization: " << hits << "/" << rec.cases.size()
               << " centroids inside the perturbed chamber, lambda "
               << format_double(rec.lambda) << (rec.lambda_from_cv ? " (cross-validated)" : "")
               << "\n";
        for (std::size_t k = 0; k < rec.cases.size(); ++k) {
            const LocalizationCase& c = rec.cases[k];
            report << "  case " << k << ": " << region_name(c.true_region) << " "
                   << format_double(c.true_delta) << " S/m -> centroid in "
                   << region_name(c.hit_region) << (c.hit ? " (hit)" : " (miss)")
                   << ", cross-talk " << format_double(c.cross_talk * 100.0) << " %\n";
        }
        report << "  motion cross-talk "
               << format_double(rec.motion_cross_talk * 100.0) << " %\n";
    } else if (config.kind == "finger") {
        FingerResult finger = run_finger_demo(config);
        report << "finger demo: " << finger.pressures.size() << " pressures at "
               << format_double(finger.carriers[0]) << "/"
               << format_double(finger.carriers[1]) << " Hz\n";
        for (std::size_t i = 0; i < finger.pressures.size(); ++i)
            report << "  " << format_double(finger.pressures[i]) << " bar: "
                   << format_double(finger.voltages(i, 0) * 1e3) << " mV / "
                   << format_double(finger.voltages(i, 1) * 1e3) << " mV\n";
    } else {
        throw ValidationError("unknown scenario kind '" + config.kind + "'");
    }

    if (!config.out_dir.empty()) {
        std::filesystem::path dir = ensure_out_dir(config.out_dir);
        std::ofstream out = open_output(dir / "summary.txt");
        out << report.str();
    }
    return report.str();
}

}  // namespace eitsense
