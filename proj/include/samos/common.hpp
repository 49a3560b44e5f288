#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace samos {

// Error hierarchy. Every failure mode in the toolkit maps onto one of
// these so callers (and the CLI) can distinguish usage problems from
// runtime problems.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct VocabularyError : Error { using Error::Error; };
struct AlignmentError : Error { using Error::Error; };
struct UndefinedCorrelationError : Error { using Error::Error; };

// FNV-1a, used for config hashes recorded into checkpoints.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace samos
