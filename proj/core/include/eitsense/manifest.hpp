// Run manifests: every CLI invocation records its inputs (with content
// hashes), outputs, parameters and seed as JSON next to the results, so any
// artifact can be traced back to the exact command that made it.

#ifndef EITSENSE_MANIFEST_HPP
#define EITSENSE_MANIFEST_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace eitsense {

struct RunManifest {
    std::string tool;                    // subcommand name
    std::string version;
    std::vector<std::string> command_line;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string timestamp;               // ISO 8601 UTC
    std::map<std::string, std::string> parameters;
    std::map<std::string, std::string> inputs;   // path -> content hash
    std::map<std::string, std::string> outputs;  // path -> content hash

    void add_input(const std::string& path);     // hashes the file bytes
    void add_output(const std::string& path);

    // Pretty-printed JSON with sorted keys.
    std::string to_json() const;
    void save(const std::string& path) const;
};

std::uint64_t hash_file(const std::string& path);

}  // namespace eitsense

#endif
