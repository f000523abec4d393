#include "mib/env.hpp"

#include "mib/corridor.hpp"

namespace mib {

std::unique_ptr<Env> make_env(const std::string& name, const EnvOptions& opts) {
  if (name == "corridor-pointmass") return std::make_unique<CorridorPointMass>(opts);
  throw std::invalid_argument("make_env: unknown task '" + name + "'");
}

}  // namespace mib
