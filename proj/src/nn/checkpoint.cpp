#include "siva/nn/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace siva::nn {

using nlohmann::json;

json to_json(const Mlp& net) {
  return json{{"layer_sizes", net.layer_sizes()},
              {"hidden_activation", to_string(Activation::leaky_relu)},
              {"leaky_slope", kLeakySlope},
              {"output_activation", to_string(net.output_activation())},
              {"parameters", std::vector<double>(net.parameters().begin(), net.parameters().end())}};
}

Mlp mlp_from_json(const json& j) {
  Mlp net(j.at("layer_sizes").get<std::vector<std::size_t>>(),
          activation_from_string(j.at("output_activation").get<std::string>()));
  const auto p = j.at("parameters").get<std::vector<double>>();
  if (p.size() != net.parameter_count())
    throw std::invalid_argument(fmt::format("checkpoint: {} parameters stored, layout needs {}",
                                            p.size(), net.parameter_count()));
  std::ranges::copy(p, net.parameters().begin());
  return net;
}

json to_json(const AdamState& s) {
  return json{{"learning_rate", s.config.learning_rate},
              {"beta1", s.config.beta1},
              {"beta2", s.config.beta2},
              {"epsilon", s.config.epsilon},
              {"step", s.step},
              {"m", s.m},
              {"v", s.v}};
}

AdamState adam_from_json(const json& j) {
  AdamState s;
  s.config.learning_rate = j.at("learning_rate").get<double>();
  s.config.beta1 = j.at("beta1").get<double>();
  s.config.beta2 = j.at("beta2").get<double>();
  s.config.epsilon = j.at("epsilon").get<double>();
  s.config.validate();
  s.step = j.at("step").get<std::uint64_t>();
  s.m = j.at("m").get<num::Vector>();
  s.v = j.at("v").get<num::Vector>();
  if (s.m.size() != s.v.size()) throw std::invalid_argument("checkpoint: Adam moment sizes differ");
  return s;
}

json to_json(const NetworkCheckpoint& c) {
  json j{{"network", to_json(c.net)}, {"adam", to_json(c.adam)}};
  if (c.rng) {
    j["rng"] = json{{"algorithm", RngStream::algorithm()}, {"state", c.rng->serialize()}};
  }
  return j;
}

NetworkCheckpoint checkpoint_from_json(const json& j) {
  NetworkCheckpoint c{mlp_from_json(j.at("network")), adam_from_json(j.at("adam")), std::nullopt};
  if (c.adam.m.size() != c.net.parameter_count())
    throw std::invalid_argument("checkpoint: Adam state does not match the network");
  if (j.contains("rng")) {
    const auto& r = j.at("rng");
    if (r.at("algorithm").get<std::string>() != RngStream::algorithm())
      throw std::invalid_argument("checkpoint: unsupported RNG algorithm");
    c.rng = RngStream::deserialize(r.at("state").get<std::string>());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkCheckpoint& c) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error(fmt::format("cannot write checkpoint {}", path.string()));
  os << to_json(c).dump(1) << '\n';
}

NetworkCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(fmt::format("cannot read checkpoint {}", path.string()));
  return checkpoint_from_json(json::parse(is));
}

}  // namespace siva::nn
