#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"
#include "siva/nn/adam.hpp"
#include "siva/nn/mlp.hpp"
#include "siva/nn/rng.hpp"

namespace siva::nn {

nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AdamState& state);
AdamState adam_from_json(const nlohmann::json& j);

/// A network, its optimizer and the stream that drives it.
struct NetworkCheckpoint {
  Mlp net;
  AdamState adam;
  std::optional<RngStream> rng;
};

nlohmann::json to_json(const NetworkCheckpoint& c);
NetworkCheckpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const NetworkCheckpoint& c);
NetworkCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace siva::nn
