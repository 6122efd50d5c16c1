#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace hicov::cli {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// "# config_hash=<16 hex digits> seed=<seed>" for the canonical dump of `config`.
std::string provenance_line(const nlohmann::json& config, std::uint64_t seed);

/// Entry point shared by the executable and the tests. Returns the process
/// exit code; diagnostics go to stderr prefixed with the failing stage.
int run_cli(int argc, const char* const* argv);

}  // namespace hicov::cli
