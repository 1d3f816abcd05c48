#pragma once

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "distag/transformer.hpp"

namespace distag {

// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Flat "key = value" config: '#' starts a comment line, blank lines are
// skipped, '_' in keys is read as '-'. Later keys win.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

// Encoder settings from config keys: preset (minibert | bert-base), then
// layers, hidden, intermediate, heads, max-positions, initializer-range.
EncoderConfig encoder_from_keys(const std::map<std::string, std::string>& keys, std::size_t vocab);

// args excludes the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace distag
