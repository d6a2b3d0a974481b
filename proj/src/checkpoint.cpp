#include "nll/checkpoint.hpp"

#include "nll/container.hpp"
#include "nll/errors.hpp"

namespace nll {

const Mlp& Checkpoint::net(const std::string& name) const {
  auto it = nets.find(name);
  if (it == nets.end()) throw IoError("checkpoint: no network named '" + name + "'");
  return it->second;
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Mlp*>>& nets,
                     const std::string& config_hash) {
  Container c;
  c.meta["kind"] = "checkpoint";
  c.meta["config_hash"] = config_hash;
  auto& dir = c.meta["nets"] = nlohmann::json::object();
  for (const auto& [name, net] : nets) {
    dir[name] = {{"layers", net->layers.size()}, {"leak", net->leak}};
    for (std::size_t l = 0; l < net->layers.size(); ++l) {
      const auto& layer = net->layers[l];
      const std::string prefix = name + "." + std::to_string(l);
      c.arrays.push_back(NamedArray::from_matrix(prefix + ".W", layer.W, "f64"));
      NamedArray b;
      b.name = prefix + ".b";
      b.dtype = "f64";
      b.rows = layer.b.size();
      b.cols = 1;
      b.f = layer.b;
      c.arrays.push_back(std::move(b));
    }
  }
  save_container(path, c);
}

Checkpoint load_checkpoint(const std::string& path) {
  Container c = load_container(path);
  if (c.meta.value("kind", "") != "checkpoint") throw IoError("not a checkpoint: " + path);
  Checkpoint ck;
  ck.config_hash = c.meta.value("config_hash", "");
  for (auto it = c.meta.at("nets").begin(); it != c.meta.at("nets").end(); ++it) {
    Mlp net;
    net.leak = it.value().value("leak", 0.01);
    const std::size_t layers = it.value().at("layers").get<std::size_t>();
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string prefix = it.key() + "." + std::to_string(l);
      LinearLayer layer;
      layer.W = c.get(prefix + ".W").to_matrix();
      layer.b = c.get(prefix + ".b").f;
      net.layers.push_back(std::move(layer));
    }
    ck.nets.emplace(it.key(), std::move(net));
  }
  return ck;
}

}  // namespace nll
