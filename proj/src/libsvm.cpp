#include <charconv>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "rgta/errors.hpp"
#include "rgta/problems.hpp"

namespace rgta {
namespace {

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<int> declared_dim) {
  if (declared_dim && *declared_dim < 1) throw std::invalid_argument("declared dimension must be >= 1");

  std::vector<double> labels;
  std::vector<Eigen::Triplet<double>> entries;
  long max_index = 0;
  std::uint64_t hash = fnv1a(nullptr, 0);

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    hash = fnv1a(line.data(), line.size(), hash);
    hash = fnv1a("\n", 1, hash);

    std::string_view rest(line);
    std::vector<std::string_view> tokens;
    while (!rest.empty()) {
      std::size_t start = 0;
      while (start < rest.size() && is_space(rest[start])) ++start;
      std::size_t end = start;
      while (end < rest.size() && !is_space(rest[end])) ++end;
      if (end > start) tokens.push_back(rest.substr(start, end - start));
      rest.remove_prefix(end);
    }
    if (tokens.empty()) continue;

    double label = 0.0;
    if (!parse_number(tokens[0], label) || !(label == 1.0 || label == -1.0 || label == 0.0)) {
      throw ParseError("label must be +1, 1, -1 or 0, got '" + std::string(tokens[0]) + "'", lineno);
    }
    const auto row = static_cast<int>(labels.size());
    labels.push_back(label == 1.0 ? 1.0 : -1.0);

    long previous = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const std::string_view token = tokens[t];
      const std::size_t colon = token.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("malformed feature token '" + std::string(token) + "'", lineno);
      }
      long index = 0;
      double value = 0.0;
      if (!parse_number(token.substr(0, colon), index)) {
        throw ParseError("malformed feature index in '" + std::string(token) + "'", lineno);
      }
      if (!parse_number(token.substr(colon + 1), value)) {
        throw ParseError("malformed feature value in '" + std::string(token) + "'", lineno);
      }
      if (index < 1) throw ParseError("feature index must be >= 1", lineno);
      if (index <= previous) throw ParseError("feature indices must be strictly increasing", lineno);
      if (declared_dim && index > *declared_dim) {
        throw ParseError("feature index " + std::to_string(index) + " exceeds declared dimension " +
                             std::to_string(*declared_dim),
                         lineno);
      }
      previous = index;
      max_index = std::max(max_index, index);
      if (value != 0.0) entries.emplace_back(row, static_cast<int>(index - 1), value);
    }
  }
  if (in.bad()) throw ParseError("read error");

  Dataset dataset;
  const long dim = declared_dim ? *declared_dim : max_index;
  dataset.features.resize(static_cast<Eigen::Index>(labels.size()), dim);
  dataset.features.setFromTriplets(entries.begin(), entries.end());
  dataset.features.makeCompressed();
  dataset.labels = std::move(labels);
  dataset.content_hash = hash;
  return dataset;
}

Dataset load_libsvm(const std::filesystem::path& path, std::optional<int> declared_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return parse_libsvm(in, declared_dim);
}

}  // namespace rgta
