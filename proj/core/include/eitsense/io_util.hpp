// Small text/binary serialization helpers shared by the file-format code:
// shortest round-trip float formatting, whitespace tokenization, an
// INI-style config reader, little-endian binary io, and FNV-1a hashing used
// for provenance records.

#ifndef EITSENSE_IO_UTIL_HPP
#define EITSENSE_IO_UTIL_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace eitsense {

// Shortest decimal string that parses back to exactly the same double
// (std::to_chars round-trip guarantee). Keeps text formats bit-stable.
std::string format_double(double value);
double parse_double(std::string_view text);     // throws ValidationError
long long parse_int(std::string_view text);     // throws ValidationError

// Splits on blanks/tabs; a '#' starts a comment running to end of line.
std::vector<std::string> tokenize_line(std::string_view line);

// Reads the next line that is neither empty nor pure comment; returns false
// on EOF. line_number tracks the position for error messages.
bool next_content_line(std::istream& in, std::vector<std::string>& tokens, int& line_number);

// INI-style config: [section] headers, key = value pairs, '#' comments.
// Section and key lookups are case-sensitive. Duplicate keys overwrite.
class ConfigFile {
public:
    static ConfigFile parse(std::istream& in);
    static ConfigFile load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key, long long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
    std::vector<std::string> sections() const;
    const std::map<std::string, std::string>& section_entries(const std::string& section) const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Little-endian scalar io for the binary payload blocks.
void write_le_u64(std::ostream& out, std::uint64_t value);
void write_le_f64(std::ostream& out, double value);
std::uint64_t read_le_u64(std::istream& in);
double read_le_f64(std::istream& in);

// Incremental FNV-1a (64-bit) over canonical serializations; cheap and
// deterministic across platforms, which is all a provenance tag needs.
class Fnv1a {
public:
    void update(const void* data, std::size_t size);
    void update(std::string_view text) { update(text.data(), text.size()); }
    void update_f64(double value);
    void update_i64(std::int64_t value);
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 14695981039346656037ull;
};

std::string hash_hex(std::uint64_t hash);

// Independent child seed for a named random stream (splitmix64 over the
// base seed and the FNV hash of the tag). Streams with different tags or
// indices never collide by construction of the mix.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index = 0);

// Opens with exceptions armed and a ValidationError naming the path on
// failure.
void require_readable(const std::string& path);

}  // namespace eitsense

#endif
