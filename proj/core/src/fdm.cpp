#include "eitsense/fdm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "eitsense/errors.hpp"
#include "eitsense/io_util.hpp"

namespace eitsense {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool integral_periods(double cycles) {
    return std::abs(cycles - std::round(cycles)) <= 1e-9 * std::max(1.0, std::abs(cycles));
}

// Rectangular-window Dirichlet response of a unit tone at offset df when
// demodulating N samples at rate fs (aliased magnitude).
double dirichlet(double df, double sample_rate, int samples) {
    double x = std::numbers::pi * df / sample_rate;
    double denom = samples * std::sin(x);
    if (std::abs(denom) < 1e-300) return 1.0;  // on-bin: full response
    return std::abs(std::sin(samples * x) / denom);
}

}  // namespace

OrthogonalityReport check_orthogonality(const std::vector<double>& frequencies, double window,
                                        double sample_rate) {
    if (!(window > 0.0)) throw ValidationError("window length must be positive");
    if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
    if (frequencies.empty()) throw ValidationError("no frequencies to check");

    OrthogonalityReport report;
    report.ok = true;
    int samples = static_cast<int>(std::round(sample_rate * window));
    std::ostringstream detail;

    for (std::size_t i = 0; i < frequencies.size(); ++i) {
        double f = frequencies[i];
        if (!(f > 0.0)) throw ValidationError("frequencies must be positive");
        bool integral = integral_periods(f * window);
        if (f >= sample_rate / 2.0) {
            integral = false;
            if (report.ok) detail << format_double(f) << " Hz violates Nyquist";
        } else if (!integral && report.ok) {
            detail << format_double(f) << " Hz completes " << format_double(f * window)
                   << " periods";
        }
        report.tone_periods_integral.push_back(integral);
        report.ok = report.ok && integral;
    }
    for (std::size_t i = 0; i < frequencies.size(); ++i)
        for (std::size_t j = i + 1; j < frequencies.size(); ++j) {
            double df = std::abs(frequencies[i] - frequencies[j]);
            bool integral = df > 0.0 && integral_periods(df * window);
            if (!integral && report.ok)
                detail << format_double(frequencies[i]) << "/" << format_double(frequencies[j])
                       << " Hz difference completes " << format_double(df * window)
                       << " periods";
            report.difference_periods_integral.push_back(integral);
            report.ok = report.ok && integral;
        }

    // Worst inter-tone leakage for this window, including the image at the
    // summed frequency that a real sine sees.
    double worst = 0.0;
    for (std::size_t i = 0; i < frequencies.size(); ++i)
        for (std::size_t j = 0; j < frequencies.size(); ++j) {
            if (i == j) continue;
            double direct = dirichlet(frequencies[i] - frequencies[j], sample_rate, samples);
            double image = dirichlet(frequencies[i] + frequencies[j], sample_rate, samples);
            worst = std::max(worst, direct + image);
        }
    report.worst_leakage_db = worst > 1e-300 ? 20.0 * std::log10(worst) : -400.0;
    report.detail = detail.str();
    return report;
}

double NoiseModel::quantum() const {
    if (bits <= 0 || bits > 62) throw ValidationError("converter bit depth out of range");
    return 2.0 * full_scale / static_cast<double>(1ll << bits);
}

double noise_std_for_snr(double amplitude, int samples, double snr_db) {
    if (!(amplitude > 0.0)) throw ValidationError("carrier amplitude must be positive");
    if (samples < 2) throw ValidationError("need at least 2 samples");
    // The lock-in averages white noise down by sqrt(2/N) on the amplitude
    // estimate; invert that for the sample-level std.
    return amplitude * std::sqrt(samples / 2.0) * std::pow(10.0, -snr_db / 20.0);
}

int TimeSeries::channel_of(int positive, int negative) const {
    for (std::size_t c = 0; c < channel_pairs.size(); ++c)
        if (channel_pairs[c].first == positive && channel_pairs[c].second == negative)
            return static_cast<int>(c);
    throw ValidationError("no recorded channel for measurement pair " +
                          std::to_string(positive) + "-" + std::to_string(negative));
}

TimeSeries synthesize_frame(const Protocol& protocol, const Eigen::VectorXd& measurements,
                            double sample_rate, double duration, const NoiseModel& noise,
                            std::uint64_t seed) {
    if (measurements.size() != protocol.measurement_count())
        throw ValidationError("expected " + std::to_string(protocol.measurement_count()) +
                              " measurement amplitudes, got " +
                              std::to_string(measurements.size()));
    if (!(sample_rate > 0.0) || !(duration > 0.0))
        throw ValidationError("sample rate and duration must be positive");
    int samples = static_cast<int>(std::round(sample_rate * duration));
    if (samples < 2) throw ValidationError("window is shorter than two samples");
    for (const Injection& inj : protocol.injections)
        if (inj.frequency >= sample_rate / 2.0)
            throw ValidationError("carrier " + format_double(inj.frequency) +
                                  " Hz violates Nyquist at " + format_double(sample_rate) +
                                  " Hz sampling");

    TimeSeries series;
    series.sample_rate = sample_rate;
    for (const Injection& inj : protocol.injections)
        for (const auto& pair : inj.measurements)
            if (std::find(series.channel_pairs.begin(), series.channel_pairs.end(), pair) ==
                series.channel_pairs.end())
                series.channel_pairs.push_back(pair);

    int channels = static_cast<int>(series.channel_pairs.size());
    series.samples = Eigen::MatrixXd::Zero(samples, channels);

    // Every injection listing a pair rides on that pair's physical wire at
    // its own carrier: simultaneous injection, separated later by lock-in.
    int m = 0;
    for (const Injection& inj : protocol.injections) {
        for (const auto& pair : inj.measurements) {
            int c = series.channel_of(pair.first, pair.second);
            double a = measurements[m++];
            double omega = kTwoPi * inj.frequency / sample_rate;
            for (int k = 0; k < samples; ++k) series.samples(k, c) += a * std::sin(omega * k);
        }
    }

    if (noise.per_channel_std && noise.per_channel_std->size() != channels)
        throw ValidationError("per-channel noise std has " +
                              std::to_string(noise.per_channel_std->size()) + " entries for " +
                              std::to_string(channels) + " channels");
    for (int c = 0; c < channels; ++c) {
        double std_c = noise.channel_std(c);
        if (std_c < 0.0) throw ValidationError("noise std must be non-negative");
        if (std_c == 0.0) continue;
        std::mt19937_64 rng(derive_seed(seed, "channel-noise", static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> gauss(0.0, std_c);
        for (int k = 0; k < samples; ++k) series.samples(k, c) += gauss(rng);
    }

    if (noise.quantize) {
        double q = noise.quantum();
        for (int c = 0; c < channels; ++c)
            for (int k = 0; k < samples; ++k)
                series.samples(k, c) = std::round(series.samples(k, c) / q) * q;
    }
    return series;
}

LockInResult demodulate(const TimeSeries& series, double frequency, bool allow_leakage) {
    if (!(frequency > 0.0)) throw ValidationError("demodulation frequency must be positive");
    if (series.sample_count() < 2) throw ValidationError("time series is empty");
    if (frequency >= series.sample_rate / 2.0)
        throw ValidationError("demodulation frequency violates Nyquist");
    double cycles = frequency * series.duration();
    LockInResult result;
    if (!integral_periods(cycles)) {
        if (!allow_leakage)
            throw ValidationError("window holds " + format_double(cycles) + " periods of " +
                                  format_double(frequency) +
                                  " Hz; non-integer windows leak (pass allow_leakage to "
                                  "override)");
        result.warning = "non-integer window (" + format_double(cycles) +
                         " periods): spectral leakage biases the estimate";
    }

    int samples = series.sample_count();
    int channels = series.channel_count();
    Eigen::VectorXd in_phase = Eigen::VectorXd::Zero(channels);
    Eigen::VectorXd quadrature = Eigen::VectorXd::Zero(channels);
    double omega = kTwoPi * frequency / series.sample_rate;
    for (int k = 0; k < samples; ++k) {
        double s = std::sin(omega * k), c = std::cos(omega * k);
        for (int ch = 0; ch < channels; ++ch) {
            in_phase[ch] += series.samples(k, ch) * s;
            quadrature[ch] += series.samples(k, ch) * c;
        }
    }
    in_phase *= 2.0 / samples;
    quadrature *= 2.0 / samples;

    result.amplitude.resize(channels);
    result.phase.resize(channels);
    for (int ch = 0; ch < channels; ++ch) {
        result.amplitude[ch] = std::hypot(in_phase[ch], quadrature[ch]);
        result.phase[ch] = std::atan2(quadrature[ch], in_phase[ch]);
    }
    return result;
}

Eigen::VectorXd VoltageFrame::in_phase() const {
    Eigen::VectorXd signed_v(amplitude.size());
    for (int m = 0; m < amplitude.size(); ++m)
        signed_v[m] = amplitude[m] * std::cos(phase[m]);
    return signed_v;
}

VoltageFrame demodulate_frame(const TimeSeries& series, const Protocol& protocol,
                              bool allow_leakage) {
    VoltageFrame frame;
    int count = protocol.measurement_count();
    frame.amplitude.resize(count);
    frame.phase.resize(count);
    // One lock-in per distinct carrier covers all channels.
    std::vector<std::pair<double, LockInResult>> cache;
    auto lockin_at = [&](double frequency) -> const LockInResult& {
        for (const auto& entry : cache)
            if (entry.first == frequency) return entry.second;
        cache.emplace_back(frequency, demodulate(series, frequency, allow_leakage));
        return cache.back().second;
    };
    int m = 0;
    for (const Injection& inj : protocol.injections) {
        const LockInResult& lock = lockin_at(inj.frequency);
        for (const auto& [pos, neg] : inj.measurements) {
            int c = series.channel_of(pos, neg);
            frame.amplitude[m] = lock.amplitude[c];
            frame.phase[m] = lock.phase[c];
            ++m;
        }
    }
    return frame;
}

Eigen::VectorXd compute_snr(const std::vector<VoltageFrame>& frames) {
    if (frames.size() < 10)
        throw ValidationError("SNR estimation needs at least 10 frames, got " +
                              std::to_string(frames.size()));
    int count = static_cast<int>(frames[0].amplitude.size());
    for (const VoltageFrame& f : frames)
        if (f.amplitude.size() != count)
            throw ValidationError("frames have inconsistent measurement counts");

    Eigen::VectorXd snr(count);
    double n = static_cast<double>(frames.size());
    for (int m = 0; m < count; ++m) {
        double mean = 0.0;
        for (const VoltageFrame& f : frames) mean += f.amplitude[m];
        mean /= n;
        double var = 0.0;
        for (const VoltageFrame& f : frames) {
            double d = f.amplitude[m] - mean;
            var += d * d;
        }
        var /= n - 1.0;
        double std = std::sqrt(var);
        snr[m] = std == 0.0 ? std::numeric_limits<double>::infinity()
                            : 20.0 * std::log10(mean / std);
    }
    return snr;
}

void save_timeseries(const TimeSeries& series, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write time-series file '" + path + "'");
    out << "EITTS 1\n";
    out << "fs " << format_double(series.sample_rate) << "\n";
    out << "channels " << series.channel_count() << "\n";
    for (const auto& [pos, neg] : series.channel_pairs)
        out << "pair " << pos << ' ' << neg << '\n';
    out << "samples " << series.sample_count() << "\n";
    out << "payload\n";
    for (int k = 0; k < series.sample_count(); ++k)
        for (int c = 0; c < series.channel_count(); ++c) write_le_f64(out, series.samples(k, c));
    if (!out) throw ValidationError("write failed for time-series file '" + path + "'");
}

TimeSeries load_timeseries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open time-series file '" + path + "'");
    std::vector<std::string> tok;
    int line = 0;
    auto fail = [&](const std::string& what) {
        throw ValidationError("time-series file line " + std::to_string(line) + ": " + what);
    };
    if (!next_content_line(in, tok, line) || tok.size() != 2 || tok[0] != "EITTS" ||
        tok[1] != "1")
        fail("expected 'EITTS 1' header");
    TimeSeries series;
    if (!next_content_line(in, tok, line) || tok.size() != 2 || tok[0] != "fs")
        fail("expected 'fs' header");
    series.sample_rate = parse_double(tok[1]);
    if (!next_content_line(in, tok, line) || tok.size() != 2 || tok[0] != "channels")
        fail("expected 'channels' header");
    int channels = static_cast<int>(parse_int(tok[1]));
    if (channels <= 0) fail("channel count must be positive");
    for (int c = 0; c < channels; ++c) {
        if (!next_content_line(in, tok, line) || tok.size() != 3 || tok[0] != "pair")
            fail("expected 'pair <pos> <neg>' line");
        series.channel_pairs.emplace_back(static_cast<int>(parse_int(tok[1])),
                                          static_cast<int>(parse_int(tok[2])));
    }
    if (!next_content_line(in, tok, line) || tok.size() != 2 || tok[0] != "samples")
        fail("expected 'samples' header");
    int samples = static_cast<int>(parse_int(tok[1]));
    if (samples <= 0) fail("sample count must be positive");
    if (!next_content_line(in, tok, line) || tok.size() != 1 || tok[0] != "payload")
        fail("expected 'payload' marker");
    series.samples.resize(samples, channels);
    for (int k = 0; k < samples; ++k)
        for (int c = 0; c < channels; ++c) series.samples(k, c) = read_le_f64(in);
    return series;
}

void save_frames(const std::vector<double>& timestamps, const std::vector<VoltageFrame>& frames,
                 const Protocol& protocol, const std::string& path) {
    if (timestamps.size() != frames.size())
        throw ValidationError("timestamp count does not match frame count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write frame log '" + path + "'");
    out << "# EITFRAMES 1\n";
    out << "timestamp";
    for (int m = 0; m < protocol.measurement_count(); ++m) out << ",m" << m;
    out << '\n';
    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (frames[f].amplitude.size() != protocol.measurement_count())
            throw ValidationError("frame " + std::to_string(f) +
                                  " does not match the protocol measurement count");
        out << format_double(timestamps[f]);
        Eigen::VectorXd v = frames[f].in_phase();
        for (int m = 0; m < v.size(); ++m) out << ',' << format_double(v[m]);
        out << '\n';
    }
    if (!out) throw ValidationError("write failed for frame log '" + path + "'");
}

FrameLog load_frames(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open frame log '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("# EITFRAMES 1", 0) != 0)
        throw ValidationError("'" + path + "' is not an EITFRAMES 1 file");
    if (!std::getline(in, line)) throw ValidationError("frame log has no column header");
    int columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 2) throw ValidationError("frame log header has no measurement columns");

    FrameLog log;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (static_cast<int>(cells.size()) != columns)
            throw ValidationError("frame log row has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(columns));
        log.timestamps.push_back(parse_double(cells[0]));
        for (int m = 1; m < columns; ++m) values.push_back(parse_double(cells[m]));
    }
    log.voltages = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                            Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(log.timestamps.size()), columns - 1);
    return log;
}

}  // namespace eitsense
