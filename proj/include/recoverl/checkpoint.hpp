#pragma once
#include <filesystem>
#include <string>
#include <vector>

#include "recoverl/sac.hpp"

namespace recoverl {

// Plain-text checkpoints: a short header (format version, env name, dims),
// then named tensors with shape lines and one row of values per line. Values
// are printed with 17 significant digits, so save -> load -> save reproduces
// the file byte for byte. Optimizer state is not serialized; loading starts
// fresh Adam moments.

struct CheckpointMeta {
    std::string env_name;
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<int> hidden;
};

void save_checkpoint(const std::filesystem::path& path, const SacState& s, const std::string& env_name);

// cfg supplies optimizer settings and must agree with the stored hidden sizes.
SacState load_checkpoint(const std::filesystem::path& path, const SacConfig& cfg, CheckpointMeta* meta = nullptr);

} // namespace recoverl
