#include "eitsense/manifest.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "eitsense/errors.hpp"
#include "eitsense/io_util.hpp"

namespace eitsense {

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "' for hashing");
    Fnv1a hash;
    char buffer[1 << 16];
    while (in.read(buffer, sizeof buffer) || in.gcount() > 0)
        hash.update(buffer, static_cast<std::size_t>(in.gcount()));
    return hash.digest();
}

void RunManifest::add_input(const std::string& path) {
    inputs[path] = hash_hex(hash_file(path));
}

void RunManifest::add_output(const std::string& path) {
    outputs[path] = hash_hex(hash_file(path));
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json doc;  // insertion order below is already sorted
    doc["command_line"] = command_line;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    doc["parameters"] = parameters;
    doc["seed"] = seed;
    doc["threads"] = threads;
    doc["timestamp"] = timestamp;
    doc["tool"] = tool;
    doc["version"] = version;
    return doc.dump(2) + "\n";
}

void RunManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write manifest '" + path + "'");
    out << to_json();
    if (!out) throw ValidationError("write failed for manifest '" + path + "'");
}

}  // namespace eitsense
