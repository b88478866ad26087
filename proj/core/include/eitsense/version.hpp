#ifndef EITSENSE_VERSION_HPP
#define EITSENSE_VERSION_HPP

namespace eitsense {

inline constexpr const char* kVersion = "0.1.0";

// Default seed used whenever the caller does not supply one. Documented in
// the CLI help and README so runs without --seed stay reproducible.
inline constexpr unsigned long long kDefaultSeed = 12345ull;

}  // namespace eitsense

#endif
