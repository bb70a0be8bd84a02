#pragma once

#include <string>
#include <string_view>

namespace rgta {

// Gradient tracking variants (communication-matrix slot assignments) and the
// baselines the simulator can run.
enum class Method {
  kRgta1,
  kRgta2,
  kRgta3,
  kCustom,
  kGd,
  kFedAvg,
  kScaffold,
  kScaffnew,
};

std::string to_string(Method m);

// Accepts the canonical names ("RGTA-1", "FedAvg", ...), case-insensitive.
Method parse_method(std::string_view name);

inline bool is_tracking_method(Method m) {
  return m == Method::kRgta1 || m == Method::kRgta2 || m == Method::kRgta3 ||
         m == Method::kCustom;
}

}  // namespace rgta
