#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace tinbc {

using cdouble = std::complex<double>;

inline constexpr int kMaxOrder = 16;

/// Finite complex signal set with an m-bit label per point.
///
/// Points are stored in label order, so point(i) carries label i and the
/// label's bits are read most-significant first. Constellations built by
/// build_gray_qam() and superimpose() are rectangular grids with unit minimum
/// distance; scale() keeps track of the complex gain applied to such a grid so
/// that the minimum distance stays available without a pairwise scan.
class LabeledConstellation {
public:
  LabeledConstellation() = default;

  /// Arbitrary point set. Cardinality must be 2^order.
  LabeledConstellation(std::vector<cdouble> points, int order);

  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return points_.size(); }
  std::span<const cdouble> points() const noexcept { return points_; }
  cdouble point(std::uint32_t label) const { return points_.at(label); }

  /// Label bit `bit` (0 = most significant) of the point with index `label`.
  int label_bit(std::uint32_t label, int bit) const noexcept {
    return static_cast<int>((label >> (order_ - 1 - bit)) & 1u);
  }

  double min_distance() const;
  cdouble mean() const;
  /// Average energy, (1/|X|) sum |x|^2.
  double energy() const;

  /// True for an unscaled unit-d_min rectangular grid.
  bool regular() const noexcept { return grid_ && grid_gain_ == cdouble{1.0, 0.0}; }
  /// True when the points are a complex multiple of a regular grid.
  bool scaled_grid() const noexcept { return grid_; }
  cdouble grid_gain() const noexcept { return grid_gain_; }
  /// Bits carried by the in-phase / quadrature grid axes (regular grids only).
  int bits_i() const noexcept { return bits_i_; }
  int bits_q() const noexcept { return bits_q_; }

private:
  friend LabeledConstellation build_gray_qam(int m);
  friend LabeledConstellation scale(const LabeledConstellation& c, cdouble g);
  friend LabeledConstellation superimpose(std::span<const LabeledConstellation> parts);

  std::vector<cdouble> points_;
  int order_ = 0;
  bool grid_ = false;
  cdouble grid_gain_{1.0, 0.0};
  int bits_i_ = 0;
  int bits_q_ = 0;
};

/// Regular rectangular Gray-labeled QAM with zero mean and d_min = 1.
/// Grid is 2^ceil(m/2) x 2^floor(m/2); the in-phase bits lead the label.
LabeledConstellation build_gray_qam(int m);

/// Multiplies every point by g. Labels are preserved.
LabeledConstellation scale(const LabeledConstellation& c, cdouble g);

/// Layered superposition, strongest owner first:
///   parts[0] + sum_{i>=1} sqrt(2^{m_0 + ... + m_{i-1}}) parts[i].
/// Labels are concatenated with parts[0] in the most significant bits.
/// Every part must be regular and every part except the last must be square
/// (even order) so the result is again a regular grid.
LabeledConstellation superimpose(std::span<const LabeledConstellation> parts);

/// sqrt(6 / (2^total_order - 1)): unit-energy gain for a square unit-d_min QAM.
double normalization_factor(int total_order);

/// Closed-form energy of a unit-d_min rectangular grid with the given axis bits.
double grid_energy(int bits_i, int bits_q);

/// Gain that brings a regular grid of the given shape to unit energy. Equals
/// normalization_factor() for square grids.
double unit_energy_gain(int bits_i, int bits_q);

/// Brute-force minimum pairwise distance.
double pairwise_min_distance(std::span<const cdouble> points);

}  // namespace tinbc
