// Frequency-division multiplexing signal chain: carrier orthogonality
// checks, time-series synthesis from a forward solution, lock-in
// demodulation back to per-measurement voltages, and SNR estimation over
// repeated frames.
//
// One physical measurement channel is one electrode pair; every injection
// whose measurement list names that pair lands on the same channel at its
// own carrier, which is what makes simultaneous injection work.

#ifndef EITSENSE_FDM_HPP
#define EITSENSE_FDM_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitsense/protocol.hpp"

namespace eitsense {

struct OrthogonalityReport {
    bool ok = false;
    // Exact integer carrier cycles per window, per tone.
    std::vector<bool> tone_periods_integral;
    // Integer cycles per window for every pairwise frequency difference
    // (flattened upper triangle, row-major).
    std::vector<bool> difference_periods_integral;
    // Worst-case inter-carrier leakage (dB, negative) estimated from the
    // Dirichlet kernel of the rectangular window; meaningful whether or not
    // the window is orthogonal.
    double worst_leakage_db = 0.0;
    std::string detail;  // first failing tone/pair, for error messages
};

// A window is orthogonal when every carrier and every pairwise difference
// completes an integer number of cycles. window in seconds; the sampling
// rate only feeds the leakage estimate and Nyquist check.
OrthogonalityReport check_orthogonality(const std::vector<double>& frequencies, double window,
                                        double sample_rate = 50e3);

struct NoiseModel {
    double std_volts = 0.0;  // additive white Gaussian, all channels
    // Per-channel override (same length as channel count) for noise floors
    // calibrated against each channel's own carrier amplitude.
    std::optional<Eigen::VectorXd> per_channel_std;
    bool quantize = false;       // round samples to the DAQ grid
    double full_scale = 10.0;    // V, symmetric range of the converter
    int bits = 16;

    double channel_std(int channel) const {
        return per_channel_std ? (*per_channel_std)[channel] : std_volts;
    }
    double quantum() const;  // volts per code
};

// Noise floor that produces a target demodulated SNR: a lock-in estimate
// over N samples attenuates white noise of std sigma to sigma*sqrt(2/N), so
// hitting `snr_db` at carrier amplitude `amplitude` needs
// sigma = amplitude * sqrt(N/2) * 10^(-snr_db/20).
double noise_std_for_snr(double amplitude, int samples, double snr_db);

struct TimeSeries {
    double sample_rate = 0.0;                        // Hz
    std::vector<std::pair<int, int>> channel_pairs;  // electrode ids
    Eigen::MatrixXd samples;                         // samples x channels, V

    int channel_count() const { return static_cast<int>(samples.cols()); }
    int sample_count() const { return static_cast<int>(samples.rows()); }
    double duration() const { return sample_count() / sample_rate; }
    // Channel carrying the given measurement pair; throws ValidationError if
    // the pair is not recorded.
    int channel_of(int positive, int negative) const;
};

// Renders the voltages of one demodulation window into raw channel samples:
// channel pairs are the protocol's distinct measurement pairs in first-seen
// order, each channel sums amplitude * sin(2*pi*f*t) over the injections
// measuring it, with the signed amplitude taken from `measurements`
// (injection-major flat order, as produced by CemSystem::forward). Noise is
// drawn from `seed`; identical seeds give identical frames.
TimeSeries synthesize_frame(const Protocol& protocol, const Eigen::VectorXd& measurements,
                            double sample_rate, double duration, const NoiseModel& noise,
                            std::uint64_t seed);

struct LockInResult {
    Eigen::VectorXd amplitude;  // per channel, >= 0
    Eigen::VectorXd phase;      // rad, relative to sin carrier
    std::string warning;        // set when demodulating a leaky window
};

// Quadrature lock-in at one carrier across all channels. Requires the
// window to hold an integer number of carrier cycles unless
// allow_leakage; throws ValidationError otherwise.
LockInResult demodulate(const TimeSeries& series, double frequency, bool allow_leakage = false);

struct VoltageFrame {
    Eigen::VectorXd amplitude;  // per flat measurement, V, >= 0
    Eigen::VectorXd phase;      // rad

    // Signed voltage: amplitude projected on the injection carrier (zero
    // injection phase), recovering the sign the forward solver produced.
    Eigen::VectorXd in_phase() const;
};

// Demodulates every protocol measurement from one frame: channel lookup by
// measurement pair, lock-in at the injection's carrier.
VoltageFrame demodulate_frame(const TimeSeries& series, const Protocol& protocol,
                              bool allow_leakage = false);

// Per-measurement SNR in dB over repeated frames: 20*log10(mean/std) of
// the demodulated amplitudes. Needs at least ten frames of a static scene;
// measurements with zero variance report +inf.
Eigen::VectorXd compute_snr(const std::vector<VoltageFrame>& frames);

// Binary time-series file ("EITTS 1").
void save_timeseries(const TimeSeries& series, const std::string& path);
TimeSeries load_timeseries(const std::string& path);

// Demodulated frame log ("EITFRAMES 1"): CSV of timestamp plus the signed
// voltage of every measurement.
void save_frames(const std::vector<double>& timestamps,
                 const std::vector<VoltageFrame>& frames, const Protocol& protocol,
                 const std::string& path);
struct FrameLog {
    std::vector<double> timestamps;
    Eigen::MatrixXd voltages;  // frames x measurements, signed
};
FrameLog load_frames(const std::string& path);

}  // namespace eitsense

#endif
