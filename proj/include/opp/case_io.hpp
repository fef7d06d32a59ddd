#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "opp/model.hpp"

namespace opp {

/// Parses and validates a case document.
///
/// Required: `machines[]`, `y_reduced` (row-major list of g*g [re, im]
/// pairs), `s_b`, `omega_0_rad_s`, and at least one of `terminal`
/// (per machine [e_re, e_im, i_re, i_im]) or `inputs` ({T_m: [], E_fd: []}).
SystemCase load_case(const nlohmann::json& doc);
SystemCase load_case_file(const std::filesystem::path& path);

nlohmann::json case_to_json(const SystemCase& sc);

/// FNV-1a over the compact serialization; stable provenance tag for outputs.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);
std::string case_hash(const SystemCase& sc);

}  // namespace opp
