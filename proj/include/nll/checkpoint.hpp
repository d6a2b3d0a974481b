#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nll/nn.hpp"

namespace nll {

/// Named parameter sets restored from disk, plus the hash of the config
/// that produced them. Arrays are stored as f64 so save/load round-trips
/// bitwise.
struct Checkpoint {
  std::map<std::string, Mlp> nets;
  std::string config_hash;

  const Mlp& net(const std::string& name) const;
};

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Mlp*>>& nets,
                     const std::string& config_hash);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace nll
