#include "eitsense/protocol.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "eitsense/errors.hpp"
#include "eitsense/io_util.hpp"
#include "eitsense/mesh.hpp"

namespace eitsense {

int Protocol::measurement_count() const {
    int count = 0;
    for (const Injection& inj : injections) count += static_cast<int>(inj.measurements.size());
    return count;
}

std::pair<int, int> Protocol::locate(int flat_index) const {
    int m = flat_index;
    for (int i = 0; i < static_cast<int>(injections.size()); ++i) {
        int size = static_cast<int>(injections[i].measurements.size());
        if (m < size) return {i, m};
        m -= size;
    }
    throw ValidationError("measurement index " + std::to_string(flat_index) + " out of range");
}

std::string Protocol::channel_label(int flat_index) const {
    auto [i, m] = locate(flat_index);
    const Injection& inj = injections[i];
    std::ostringstream label;
    label << "inj " << inj.source << '-' << inj.sink << " @" << format_double(inj.frequency)
          << " Hz meas " << inj.measurements[m].first << '-' << inj.measurements[m].second;
    return label.str();
}

void Protocol::validate(int electrode_count) const {
    if (injections.empty()) throw ValidationError("protocol has no injections");
    // Simultaneous injections are only separable on distinct carriers.
    for (std::size_t i = 0; i < injections.size(); ++i)
        for (std::size_t j = i + 1; j < injections.size(); ++j)
            if (injections[i].frequency == injections[j].frequency)
                throw ValidationError("injections " + std::to_string(i) + " and " +
                                      std::to_string(j) + " share the carrier " +
                                      format_double(injections[i].frequency) + " Hz");
    auto check_id = [&](int id, const char* what) {
        if (id < 1 || id > electrode_count)
            throw ValidationError(std::string(what) + " electrode id " + std::to_string(id) +
                                  " does not exist (mesh has " +
                                  std::to_string(electrode_count) + ")");
    };
    for (const Injection& inj : injections) {
        check_id(inj.source, "injection source");
        check_id(inj.sink, "injection sink");
        if (inj.source == inj.sink)
            throw ValidationError("injection source and sink are both electrode " +
                                  std::to_string(inj.source));
        if (!(inj.amplitude > 0.0))
            throw ValidationError("injection amplitude must be positive");
        if (!(inj.frequency >= 10.0 && inj.frequency <= 100e3))
            throw ValidationError("injection frequency " + format_double(inj.frequency) +
                                  " Hz outside the supported 10 Hz - 100 kHz band");
        if (inj.measurements.empty())
            throw ValidationError("injection " + std::to_string(inj.source) + "-" +
                                  std::to_string(inj.sink) + " has no measurements");
        for (const auto& [pos, neg] : inj.measurements) {
            check_id(pos, "measurement positive");
            check_id(neg, "measurement negative");
            if (pos == neg)
                throw ValidationError("measurement pair uses electrode " +
                                      std::to_string(pos) + " twice");
        }
    }
}

void Protocol::validate(const Mesh& mesh) const {
    // Electrode ids must exist in the mesh, not merely be in range.
    std::set<int> ids;
    for (const ElectrodePatch& e : mesh.electrodes) ids.insert(e.id);
    auto check_id = [&](int id, const char* what) {
        if (!ids.count(id))
            throw ValidationError(std::string(what) + " electrode id " + std::to_string(id) +
                                  " does not exist in the mesh");
    };
    for (const Injection& inj : injections) {
        check_id(inj.source, "injection source");
        check_id(inj.sink, "injection sink");
        for (const auto& [pos, neg] : inj.measurements) {
            check_id(pos, "measurement positive");
            check_id(neg, "measurement negative");
        }
    }
    validate(mesh.electrode_count() == 0
                 ? 0
                 : *std::max_element(ids.begin(), ids.end()));
}

std::uint64_t Protocol::content_hash() const {
    Fnv1a h;
    h.update_i64(static_cast<std::int64_t>(injections.size()));
    for (const Injection& inj : injections) {
        h.update_i64(inj.source);
        h.update_i64(inj.sink);
        h.update_f64(inj.amplitude);
        h.update_f64(inj.frequency);
        h.update_i64(static_cast<std::int64_t>(inj.measurements.size()));
        for (const auto& [pos, neg] : inj.measurements) {
            h.update_i64(pos);
            h.update_i64(neg);
        }
    }
    return h.digest();
}

void Protocol::write(std::ostream& out) const {
    out << "EITPROT 1\n";
    for (const Injection& inj : injections) {
        out << "inject " << inj.source << ' ' << inj.sink << ' '
            << format_double(inj.amplitude * 1e6) << ' ' << format_double(inj.frequency)
            << '\n';
        for (const auto& [pos, neg] : inj.measurements)
            out << "measure " << pos << ' ' << neg << '\n';
    }
}

Protocol Protocol::read(std::istream& in) {
    std::vector<std::string> tok;
    int line = 0;
    auto fail = [&](const std::string& what) {
        throw ValidationError("protocol file line " + std::to_string(line) + ": " + what);
    };
    if (!next_content_line(in, tok, line) || tok.size() != 2 || tok[0] != "EITPROT")
        fail("expected 'EITPROT 1' header");
    if (tok[1] != "1") fail("unsupported protocol format version " + tok[1]);

    Protocol protocol;
    while (next_content_line(in, tok, line)) {
        if (tok[0] == "inject") {
            if (tok.size() != 5) fail("expected: inject <src> <snk> <amp_uA> <freq_hz>");
            Injection inj;
            inj.source = static_cast<int>(parse_int(tok[1]));
            inj.sink = static_cast<int>(parse_int(tok[2]));
            inj.amplitude = parse_double(tok[3]) * 1e-6;
            inj.frequency = parse_double(tok[4]);
            protocol.injections.push_back(inj);
        } else if (tok[0] == "measure") {
            if (tok.size() != 3) fail("expected: measure <pos> <neg>");
            if (protocol.injections.empty()) fail("'measure' before any 'inject'");
            protocol.injections.back().measurements.emplace_back(
                static_cast<int>(parse_int(tok[1])), static_cast<int>(parse_int(tok[2])));
        } else {
            fail("unknown directive '" + tok[0] + "'");
        }
    }
    if (protocol.injections.empty()) fail("protocol has no injections");
    return protocol;
}

void Protocol::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write protocol file '" + path + "'");
    write(out);
    if (!out) throw ValidationError("write failed for protocol file '" + path + "'");
}

Protocol Protocol::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open protocol file '" + path + "'");
    return read(in);
}

Protocol make_hinged_protocol() {
    Protocol protocol;
    const std::vector<std::pair<int, int>> taps{{2, 5}, {1, 4}, {3, 6}};
    struct Drive {
        int src, snk;
        double freq;
    };
    for (const Drive& d : {Drive{1, 6, 2e3}, Drive{2, 3, 4e3}, Drive{4, 5, 6e3}}) {
        Injection inj;
        inj.source = d.src;
        inj.sink = d.snk;
        inj.amplitude = 165e-6;
        inj.frequency = d.freq;
        inj.measurements = taps;
        protocol.injections.push_back(inj);
    }
    return protocol;
}

Protocol make_finger_protocol(double frequency) {
    Injection inj;
    inj.source = 1;
    inj.sink = 2;
    inj.amplitude = 165e-6;
    inj.frequency = frequency;
    inj.measurements = {{1, 2}};
    Protocol protocol;
    protocol.injections.push_back(inj);
    return protocol;
}

}  // namespace eitsense
