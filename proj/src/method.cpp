#include "rgta/method.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <utility>

namespace rgta {
namespace {

constexpr std::array<std::pair<Method, std::string_view>, 8> kNames{{
    {Method::kRgta1, "RGTA-1"},
    {Method::kRgta2, "RGTA-2"},
    {Method::kRgta3, "RGTA-3"},
    {Method::kCustom, "custom"},
    {Method::kGd, "GD"},
    {Method::kFedAvg, "FedAvg"},
    {Method::kScaffold, "Scaffold"},
    {Method::kScaffnew, "Scaffnew"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [method, name] : kNames) {
    if (method == m) return std::string(name);
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [method, canonical] : kNames) {
    if (iequals(name, canonical)) return method;
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

}  // namespace rgta
