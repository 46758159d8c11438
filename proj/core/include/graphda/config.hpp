#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "graphda/trainer.hpp"

namespace graphda {

inline constexpr const char* kToolVersion = "graphda 0.1.0";

// Flat "key = value" text format; '#' starts a comment. Keys are the
// training knobs plus ablation flags; unknown keys are rejected.
using KeyValues = std::map<std::string, std::string>;

KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv,
                      const std::string& header_comment = {});

// Parses "20,20" and "1024/64" style lists.
std::vector<std::size_t> parse_size_list(const std::string& text);

// allow_unknown permits extra keys (manifests carry paths and timestamps).
TrainConfig config_from_kv(const KeyValues& kv, bool allow_unknown = false);
AblationFlags flags_from_kv(const KeyValues& kv);
KeyValues config_to_kv(const TrainConfig& config, const AblationFlags& flags);

// Run manifest: the full config snapshot plus tool version, input paths and
// timestamps. Timestamp keys are excluded from idempotence comparisons.
void write_manifest(const std::filesystem::path& path, KeyValues kv);

}  // namespace graphda
