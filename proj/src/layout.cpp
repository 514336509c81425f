#include "simfl/layout.hpp"

#include "simfl/errors.hpp"

namespace simfl {

std::string to_string(UpdateType t) {
  switch (t) {
    case UpdateType::WW: return "WW";
    case UpdateType::WBW: return "WBW";
    case UpdateType::WG: return "WG";
    case UpdateType::WBG: return "WBG";
  }
  return "?";
}

UpdateType parse_update_type(std::string_view s) {
  if (s == "WW") return UpdateType::WW;
  if (s == "WBW") return UpdateType::WBW;
  if (s == "WG") return UpdateType::WG;
  if (s == "WBG") return UpdateType::WBG;
  throw ConfigError("update_type must be one of WW, WBW, WG, WBG (got '" +
                    std::string(s) + "')");
}

}  // namespace simfl
