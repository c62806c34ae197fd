#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qsteer {

// Trim, lowercase, and collapse internal whitespace runs to single spaces.
// Idempotent: canonicalize(canonicalize(s)) == canonicalize(s).
std::string canonicalize(std::string_view raw);

// Lowercased maximal [a-z0-9] runs of the input.
std::vector<std::string> tokenize(std::string_view text);

// FNV-1a 64-bit. Used for feature hashing and content fingerprints; fixed
// constants keep hashes identical across platforms (std::hash is not).
std::uint64_t fnv1a64(std::string_view s);

}  // namespace qsteer
