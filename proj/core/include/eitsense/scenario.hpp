// End-to-end experiment drivers tying the solver, signal chain and
// reconstruction together: quasi-static bend sweeps of the hinged actuator,
// a resistor phantom for electronics-only checks, perturbation/localization
// experiments, and the two-chamber finger demo. Actuator state enters the
// electrical model through scalar per-region conductivity multipliers; the
// mapping is a behavioural surrogate fitted to observed voltage trends, not
// a mechanical model.

#ifndef EITSENSE_SCENARIO_HPP
#define EITSENSE_SCENARIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitsense/conductivity.hpp"
#include "eitsense/fdm.hpp"
#include "eitsense/mesh.hpp"
#include "eitsense/protocol.hpp"

namespace eitsense {

struct BendState {
    double hinge1_deg = 0.0;
    double hinge2_deg = 0.0;
};

// Conductivity multiplier of one hinge region as a function of its bend
// angle, with g(0) = 1 exactly. Two observed behaviours are covered:
//   Knee     - slight rise up to the knee angle (film slack), then a smooth
//              drop as the hinge necks; non-monotone overall.
//   Monotone - plain compressive drop, g = 1 / (1 + slope * theta / 90).
// Each hinge also leaks a small effect into its outer neighbouring chamber
// (chamber_gain), which bounds cross-talk between the two bend DOFs.
struct HingeResponse {
    enum class Form { Knee, Monotone };
    Form form = Form::Knee;
    double knee_deg = 50.0;
    double rise = 0.1;          // relative peak height below the knee
    double end_value = 0.3;     // g(90)
    double slope = 1.0;         // Monotone form only
    double chamber_gain = 0.02; // outer-chamber multiplier strength

    double factor(double theta_deg) const;          // g(theta)
    double chamber_factor(double theta_deg) const;  // 1 - chamber_gain*theta/90
};

struct ActuatorModel {
    double baseline_sigma = 0.2;  // S/m
    HingeResponse hinge1;         // Knee defaults
    HingeResponse hinge2;         // Monotone defaults
    static ActuatorModel defaults();
};

// Maps a bend state onto the hinged-actuator mesh: hinge regions get their
// g(theta), the outer chambers their leak factors, everything else stays at
// baseline. Angles must lie in [0, 90].
Conductivity bend_to_conductivity(const Mesh& mesh, const ActuatorModel& model,
                                  const BendState& state);

// Hydraulic finger chamber: pressure thins the film over the chamber, so
// conductance drops with p in [0, max_pressure) bar.
struct FingerModel {
    double baseline_sigma = 0.2;
    double pressure_gain = 1.0;
    double max_pressure = 0.5;  // bar

    double factor(double pressure_bar) const;
};

// ---------------------------------------------------------------------------
// Scenario configuration (INI file, see data/hinged_sweep.cfg for a worked
// example).

struct ScenarioConfig {
    std::string kind = "sweep";  // sweep | phantom | reconstruction | finger
    std::string mesh_source = "builtin:hinged";      // or a mesh file path
    std::string protocol_source = "builtin:hinged";  // or a protocol path

    std::vector<BendState> states;   // sweep/reconstruction
    std::vector<double> pressures;   // finger, bar

    double sample_rate = 50e3;  // Hz
    double window = 20e-3;      // s per demodulation frame
    int frames_per_state = 1;
    double snr_db = 66.0;       // noise floor calibrated per channel
    bool noiseless = false;
    bool quantize = true;

    double lambda = -1.0;       // reconstruction; < 0 selects by CV
    int cv_perturbations = 20;
    double hex_voxel_mm = 5.0;  // <= 0 disables hex regrouping

    // Phantom bench: one resistor per measurement channel.
    std::vector<double> resistances{171.0, 236.0, 305.0, 476.0};  // Ohm
    std::vector<double> frequencies{2e3, 4e3, 6e3, 8e3, 10e3, 12e3};
    double amplitude = 165e-6;  // A
    int phantom_frames = 100;

    std::uint64_t seed = 0;     // 0 = library default
    std::string out_dir;        // empty = keep results in memory only

    ActuatorModel actuator = ActuatorModel::defaults();
    FingerModel finger;

    static ScenarioConfig load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Results

struct ChannelTrend {
    double r2_linear = 0.0;    // goodness of a straight-line fit vs angle
    bool monotone = false;     // strictly monotone across the sweep
    double peak_angle = 0.0;   // angle of the extremal response
    double range_mv = 0.0;     // max - min, millivolts
};

struct SweepResult {
    std::vector<BendState> states;
    Eigen::MatrixXd voltages;   // state x measurement, signed demodulated V
    Eigen::VectorXd baseline;   // noiseless rest frame, same measurement order
    std::vector<ChannelTrend> trends;
    Protocol protocol;
};

// Sweeps the given states: per state, forward solve -> frame synthesis ->
// demodulation. Writes frames.csv, voltages.csv and summary.txt when
// out_dir is set. The frame at state index i uses a seed derived from
// (config.seed, i), so runs are reproducible end to end.
SweepResult run_static_sweep(const ScenarioConfig& config);

struct PhantomResult {
    Eigen::MatrixXd mean_voltage;       // channel x frequency, V
    Eigen::MatrixXd snr_db;             // channel x frequency
    Eigen::VectorXd frequency_spread;   // per channel: max relative deviation
                                        // of the mean across carriers
    std::vector<double> frequencies;
    std::vector<double> resistances;
};

// Drives the protocol currents through known resistors instead of the FEM
// model (one resistor per measurement channel, V = I * R at every carrier),
// then runs the full synthesis/demodulation chain per carrier. The noise
// floor is calibrated per channel so every channel meets config.snr_db.
PhantomResult run_resistor_phantom(const ScenarioConfig& config);

struct LocalizationCase {
    int true_region = 0;          // region tag that was perturbed
    double true_delta = 0.0;      // S/m applied
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();  // of top-decile |ds|
    int hit_region = 0;           // region containing that centroid
    bool hit = false;
    double cross_talk = 0.0;      // off-region mass fraction of the other DOF
};

struct ReconstructionExperimentResult {
    std::vector<LocalizationCase> cases;
    double lambda = 0.0;
    bool lambda_from_cv = false;
    Eigen::MatrixXd reconstructions;  // case x element delta_sigma
    // Voltage-level DOF isolation: largest ratio of cross-chamber injection
    // change to same-chamber injection change under single-DOF motion.
    double motion_cross_talk = 0.0;
};

// Perturbs one region per case against the flat baseline, simulates the
// measurement (noiseless or at the configured SNR), reconstructs, and scores
// localization: the volume-weighted centroid of the top decile of
// |delta_sigma| must fall inside the perturbed region.
ReconstructionExperimentResult run_reconstruction_experiment(const ScenarioConfig& config);

struct FingerResult {
    std::vector<double> pressures;
    Eigen::MatrixXd voltages;     // pressure x chamber (2 columns)
    std::vector<double> carriers; // Hz, per chamber
};

// Two independent chambers sampled on one wire pair each, multiplexed at
// 2 kHz and 12 kHz. The chambers are separate meshes solved independently;
// the composite only shares the acquisition window.
FingerResult run_finger_demo(const ScenarioConfig& config);

// Dispatches on config.kind and writes outputs/summary to config.out_dir.
// Returns the summary text.
std::string run_scenario(const ScenarioConfig& config);

}  // namespace eitsense

#endif
