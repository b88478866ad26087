#include "eitsense/io_util.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "eitsense/errors.hpp"

namespace eitsense {

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw NumericalError("failed to format double");
    return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError("expected a number, got '" + std::string(text) + "'");
    return value;
}

long long parse_int(std::string_view text) {
    long long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError("expected an integer, got '" + std::string(text) + "'");
    return value;
}

std::vector<std::string> tokenize_line(std::string_view line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size() || line[i] == '#') break;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
               line[i] != '#')
            ++i;
        tokens.emplace_back(line.substr(start, i - start));
    }
    return tokens;
}

bool next_content_line(std::istream& in, std::vector<std::string>& tokens, int& line_number) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_number;
        tokens = tokenize_line(line);
        if (!tokens.empty()) return true;
    }
    return false;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in) {
    ConfigFile config;
    std::string line;
    std::string section;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::string content = trim(line);
        if (content.empty()) continue;
        if (content.front() == '[') {
            if (content.back() != ']')
                throw ValidationError("config line " + std::to_string(line_number) +
                                      ": unterminated section header");
            section = trim(std::string_view(content).substr(1, content.size() - 2));
            config.sections_[section];
            continue;
        }
        auto eq = content.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_number) +
                                  ": expected key = value");
        std::string key = trim(std::string_view(content).substr(0, eq));
        std::string value = trim(std::string_view(content).substr(eq + 1));
        if (key.empty())
            throw ValidationError("config line " + std::to_string(line_number) + ": empty key");
        config.sections_[section][key] = value;
    }
    return config;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    return parse(in);
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end())
        throw ValidationError("config: missing section [" + section + "]");
    auto k = s->second.find(key);
    if (k == s->second.end())
        throw ValidationError("config: missing key '" + key + "' in [" + section + "]");
    return k->second;
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    return has(section, key) ? parse_double(get(section, key)) : fallback;
}

long long ConfigFile::get_int(const std::string& section, const std::string& key,
                              long long fallback) const {
    return has(section, key) ? parse_int(get(section, key)) : fallback;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("config: key '" + key + "' in [" + section +
                          "] is not a boolean: '" + v + "'");
}

std::vector<double> ConfigFile::get_doubles(const std::string& section,
                                            const std::string& key) const {
    std::vector<double> values;
    std::string raw = get(section, key);
    for (char& c : raw)
        if (c == ',') c = ' ';
    for (const std::string& token : tokenize_line(raw)) values.push_back(parse_double(token));
    return values;
}

std::vector<std::string> ConfigFile::sections() const {
    std::vector<std::string> names;
    names.reserve(sections_.size());
    for (const auto& [name, entries] : sections_) names.push_back(name);
    return names;
}

const std::map<std::string, std::string>& ConfigFile::section_entries(
    const std::string& section) const {
    auto s = sections_.find(section);
    if (s == sections_.end())
        throw ValidationError("config: missing section [" + section + "]");
    return s->second;
}

void write_le_u64(std::ostream& out, std::uint64_t value) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

void write_le_f64(std::ostream& out, double value) {
    write_le_u64(out, std::bit_cast<std::uint64_t>(value));
}

std::uint64_t read_le_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw ValidationError("unexpected end of binary payload");
    std::uint64_t value = 0;
    for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return value;
}

double read_le_f64(std::istream& in) { return std::bit_cast<double>(read_le_u64(in)); }

void Fnv1a::update(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        state_ ^= bytes[i];
        state_ *= 1099511628211ull;
    }
}

void Fnv1a::update_f64(double value) {
    auto bits = std::bit_cast<std::uint64_t>(value);
    update(&bits, sizeof bits);
}

void Fnv1a::update_i64(std::int64_t value) { update(&value, sizeof value); }

std::string hash_hex(std::uint64_t hash) {
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[hash & 0xf];
        hash >>= 4;
    }
    buf[16] = '\0';
    return buf;
}

void require_readable(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index) {
    Fnv1a tag;
    tag.update(stream);
    return splitmix64(splitmix64(base ^ tag.digest()) + index);
}

}  // namespace eitsense
