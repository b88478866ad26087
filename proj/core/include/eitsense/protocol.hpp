// Measurement protocols: which electrode pairs inject current at which
// carrier frequency, and which pairs are measured for each injection. All
// injections run simultaneously (frequency-division multiplexing), so the
// flattened measurement list is injection-major.

#ifndef EITSENSE_PROTOCOL_HPP
#define EITSENSE_PROTOCOL_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace eitsense {

class Mesh;

struct Injection {
    int source = 0;            // electrode ids, 1-based
    int sink = 0;
    double amplitude = 165e-6; // A
    double frequency = 0.0;    // Hz carrier
    std::vector<std::pair<int, int>> measurements;  // (positive, negative)
};

class Protocol {
public:
    std::vector<Injection> injections;

    int measurement_count() const;

    // (injection index, measurement index within it) for flat index m.
    std::pair<int, int> locate(int flat_index) const;

    // Human-readable channel label, e.g. "inj 1-6 @2000 Hz meas 2-5".
    std::string channel_label(int flat_index) const;

    // Every electrode id referenced must exist in the mesh; sources differ
    // from sinks, positives from negatives; frequencies and amplitudes are
    // positive. Throws ValidationError.
    void validate(const Mesh& mesh) const;
    void validate(int electrode_count) const;

    std::uint64_t content_hash() const;

    static Protocol load(const std::string& path);
    void save(const std::string& path) const;
    void write(std::ostream& out) const;
    static Protocol read(std::istream& in);
};

// The three-injection protocol used with the hinged actuator: 1-6 at 2 kHz,
// 2-3 at 4 kHz, 4-5 at 6 kHz, 165 uA each, measuring 2-5, 1-4 and 3-6 for
// every injection (9 channels).
Protocol make_hinged_protocol();

// Two-electrode chamber: inject 1-2 and measure the same pair.
Protocol make_finger_protocol(double frequency);

}  // namespace eitsense

#endif
