#pragma once

// Discrete contact-status encoding: the status set {-n..n}, the commanded
// correction and the percept label all share one integer axis.
//   s > 0  left alignment error  (L1..Ln)
//   s < 0  right alignment error (R1..Rn)
//   s = 0  insertable region M

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StatusSpace {
 public:
  StatusSpace(int n = 3, double delta_mm = 0.5) : n_(n), delta_mm_(delta_mm) {
    if (n < 1) throw ConfigError("status space: n must be >= 1");
    if (!(delta_mm > 0.0)) throw ConfigError("status space: delta_mm must be > 0");
  }

  int n() const { return n_; }
  double delta_mm() const { return delta_mm_; }
  int size() const { return 2 * n_ + 1; }

  bool contains(int s) const { return std::abs(s) <= n_; }

  // Canonical dense index: ascending s, so index 0 is R_n and index 2n is L_n.
  int index_of(int s) const { return s + n_; }
  int value_at(int index) const { return index - n_; }

  friend bool operator==(const StatusSpace&, const StatusSpace&) = default;

 private:
  int n_;
  double delta_mm_;
};

namespace detail {

template <class Tag>
class Label {
 public:
  constexpr Label() = default;
  constexpr explicit Label(int v) : v_(v) {}
  constexpr int value() const { return v_; }
  friend constexpr bool operator==(Label, Label) = default;
  friend constexpr auto operator<=>(Label, Label) = default;

 private:
  int v_ = 0;
};

struct StatusTag {};
struct ActionTag {};
struct PerceptTag {};

}  // namespace detail

using Status = detail::Label<detail::StatusTag>;
using ActionCmd = detail::Label<detail::ActionTag>;
using PerceptSignal = detail::Label<detail::PerceptTag>;

// "M", "L2", "R3", ...
std::string label_name(int s);
// Inverse of label_name; throws ConfigError on an unknown label or one outside the space.
int parse_label(const std::string& label, const StatusSpace& space);
// Labels in canonical ascending order: R_n .. R_1, M, L_1 .. L_n.
std::vector<std::string> canonical_labels(const StatusSpace& space);

}  // namespace ffc
