#include "ffc/status.hpp"

#include <charconv>

namespace ffc {

std::string label_name(int s) {
  if (s == 0) return "M";
  return (s > 0 ? "L" : "R") + std::to_string(std::abs(s));
}

int parse_label(const std::string& label, const StatusSpace& space) {
  if (label == "M") return 0;
  if (label.size() >= 2 && (label[0] == 'L' || label[0] == 'R')) {
    int k = 0;
    const char* first = label.data() + 1;
    const char* last = label.data() + label.size();
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec == std::errc() && ptr == last && k >= 1 && k <= space.n()) {
      return label[0] == 'L' ? k : -k;
    }
  }
  throw ConfigError("unknown status label '" + label + "' for n=" + std::to_string(space.n()));
}

std::vector<std::string> canonical_labels(const StatusSpace& space) {
  std::vector<std::string> out;
  out.reserve(space.size());
  for (int s = -space.n(); s <= space.n(); ++s) out.push_back(label_name(s));
  return out;
}

}  // namespace ffc
