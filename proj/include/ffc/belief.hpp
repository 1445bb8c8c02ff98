#pragma once

// Reliability distribution over contact statuses and the two recursive
// updates applied to it each insertion: the action shift (mass moves with the
// commanded correction, out-of-range mass is dropped) and the Bayes update
// against a perception likelihood matrix.
//
// Everything here is a value type templated on the scalar; the library itself
// instantiates double.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "ffc/status.hpp"

namespace ffc {

class ImpossibleObservation : public std::runtime_error {
 public:
  explicit ImpossibleObservation(int z)
      : std::runtime_error("observation " + label_name(z) +
                           " has zero likelihood under the whole prior support"),
        z_(z) {}
  int percept() const { return z_; }

 private:
  int z_;
};

class MalformedMatrix : public std::runtime_error {
 public:
  MalformedMatrix(int row, const std::string& why)
      : std::runtime_error("malformed perception matrix at row " + std::to_string(row) + ": " + why),
        row_(row) {}
  int row() const { return row_; }

 private:
  int row_;
};

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
class Belief {
 public:
  using VectorType = Vector<Scalar>;

  // Uniform over the default space.
  Belief() : space_(), probs_(VectorType::Constant(space_.size(), Scalar(1) / Scalar(space_.size()))) {}

  Belief(StatusSpace space, VectorType probs) : space_(space), probs_(std::move(probs)) {
    if (probs_.size() != space_.size())
      throw ConfigError("belief: expected " + std::to_string(space_.size()) + " entries, got " +
                        std::to_string(probs_.size()));
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
      if (!(probs_[i] >= Scalar(0)) || !std::isfinite(static_cast<double>(probs_[i])))
        throw ConfigError("belief: entries must be finite and non-negative");
    }
  }

  const StatusSpace& space() const { return space_; }
  const VectorType& probs() const { return probs_; }
  Scalar at(int s) const { return probs_[space_.index_of(s)]; }
  Scalar mass() const { return probs_.sum(); }

  friend bool operator==(const Belief& a, const Belief& b) {
    return a.space_ == b.space_ && a.probs_ == b.probs_;
  }

 private:
  StatusSpace space_;
  VectorType probs_;
};

// rows(s, z) = p(z | s), canonical ascending order on both axes. row_counts
// carries the number of samples each row was estimated from, when known.
template <class Scalar>
class PerceptionMatrix {
 public:
  using MatrixType = Matrix<Scalar>;

  const StatusSpace& space() const { return space_; }
  const MatrixType& rows() const { return rows_; }
  Scalar likelihood(int z, int s) const { return rows_(space_.index_of(s), space_.index_of(z)); }
  const std::optional<Vector<double>>& row_counts() const { return row_counts_; }

  // Use validate_matrix; this assumes the checks already passed.
  static PerceptionMatrix checked(StatusSpace space, MatrixType rows,
                                  std::optional<Vector<double>> counts) {
    return PerceptionMatrix(space, std::move(rows), std::move(counts));
  }

 private:
  PerceptionMatrix(StatusSpace space, MatrixType rows, std::optional<Vector<double>> counts)
      : space_(space), rows_(std::move(rows)), row_counts_(std::move(counts)) {}

  StatusSpace space_;
  MatrixType rows_;
  std::optional<Vector<double>> row_counts_;
};

inline constexpr double kRowSumTolerance = 1e-6;

// The only way to obtain a PerceptionMatrix: square, entries in [0,1], rows
// summing to one within kRowSumTolerance.
template <class Scalar>
PerceptionMatrix<Scalar> validate_matrix(Matrix<Scalar> rows, const StatusSpace& space,
                                         std::optional<Vector<double>> row_counts = std::nullopt) {
  const int k = space.size();
  if (rows.rows() != k || rows.cols() != k)
    throw MalformedMatrix(static_cast<int>(std::min<Eigen::Index>(rows.rows(), k)),
                          "expected a " + std::to_string(k) + "x" + std::to_string(k) + " matrix");
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      const double v = static_cast<double>(rows(r, c));
      if (!(v >= 0.0 && v <= 1.0)) throw MalformedMatrix(r, "entry outside [0,1]");
    }
    const double sum = static_cast<double>(rows.row(r).sum());
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw MalformedMatrix(r, "row sums to " + std::to_string(sum));
  }
  if (row_counts && row_counts->size() != k)
    throw MalformedMatrix(0, "row_counts has wrong length");
  return PerceptionMatrix<Scalar>::checked(space, std::move(rows), std::move(row_counts));
}

template <class Scalar>
Belief<Scalar> uniform_belief(const StatusSpace& space) {
  return Belief<Scalar>(space, Vector<Scalar>::Constant(space.size(), Scalar(1) / Scalar(space.size())));
}

// result[s] = b[s - u] when s - u is inside the space, else 0. No
// renormalisation: the measurement update's normaliser absorbs lost mass.
template <class Scalar>
Belief<Scalar> shift_update(const Belief<Scalar>& b, ActionCmd u) {
  const StatusSpace& space = b.space();
  if (!space.contains(u.value()))
    throw std::invalid_argument("shift_update: |u| exceeds n");
  const int k = space.size();
  const int d = u.value();
  Vector<Scalar> out = Vector<Scalar>::Zero(k);
  // index arithmetic: dest index i takes source index i - d
  const int first = std::max(0, d);
  const int last = std::min(k, k + d);
  if (last > first) out.segment(first, last - first) = b.probs().segment(first - d, last - first);
  if (!(out.sum() > Scalar(0)))
    throw std::domain_error("shift_update: belief mass shifted entirely out of the status space");
  return Belief<Scalar>(space, std::move(out));
}

template <class Scalar>
Belief<Scalar> measurement_update(const Belief<Scalar>& b, PerceptSignal z,
                                  const PerceptionMatrix<Scalar>& m) {
  const StatusSpace& space = b.space();
  if (!(m.space() == space)) throw ConfigError("measurement_update: matrix and belief spaces differ");
  if (!space.contains(z.value())) throw std::invalid_argument("measurement_update: percept outside space");
  Vector<Scalar> joint = m.rows().col(space.index_of(z.value())).cwiseProduct(b.probs());
  const Scalar eta = joint.sum();
  if (!(eta > Scalar(0))) throw ImpossibleObservation(z.value());
  joint /= eta;
  return Belief<Scalar>(space, std::move(joint));
}

template <class Scalar>
struct Estimate {
  Status status;
  Scalar reliability;
};

// Argmax with a fixed tie order 0, -1, +1, -2, +2, ...: the smallest
// correction wins, then the right-hand (negative) side.
template <class Scalar>
Estimate<Scalar> map_estimate(const Belief<Scalar>& b) {
  const StatusSpace& space = b.space();
  int best = 0;
  Scalar best_p = b.at(0);
  for (int k = 1; k <= space.n(); ++k) {
    for (int s : {-k, k}) {
      if (b.at(s) > best_p) {
        best = s;
        best_p = b.at(s);
      }
    }
  }
  return {Status(best), best_p};
}

// Additive smoothing of each row against its sample count N_s (1 when the
// matrix carries no counts). alpha = 0 returns the input unchanged.
template <class Scalar>
PerceptionMatrix<Scalar> smooth_matrix(const PerceptionMatrix<Scalar>& m, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("smooth_matrix: alpha must be >= 0");
  if (alpha == 0.0) return m;
  const int k = m.space().size();
  Matrix<Scalar> rows = m.rows();
  for (int r = 0; r < k; ++r) {
    const Scalar count = m.row_counts() ? Scalar((*m.row_counts())[r]) : Scalar(1);
    rows.row(r) = (rows.row(r).array() * count + Scalar(alpha)) / (count + Scalar(alpha) * Scalar(k));
    rows.row(r) /= rows.row(r).sum();
  }
  return validate_matrix<Scalar>(std::move(rows), m.space(), m.row_counts());
}

using BeliefD = Belief<double>;
using PerceptionMatrixD = PerceptionMatrix<double>;
using EstimateD = Estimate<double>;

}  // namespace ffc
