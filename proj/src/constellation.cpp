#include "tinbc/constellation.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tinbc {

namespace {

std::uint32_t gray_to_index(std::uint32_t g) {
  std::uint32_t p = g;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) p ^= p >> shift;
  return p;
}

double axis_coordinate(std::uint32_t gray_label, int bits) {
  if (bits == 0) return 0.0;
  const double levels = std::ldexp(1.0, bits);
  return static_cast<double>(gray_to_index(gray_label)) - (levels - 1.0) / 2.0;
}

}  // namespace

LabeledConstellation::LabeledConstellation(std::vector<cdouble> points, int order)
    : points_(std::move(points)), order_(order) {
  if (order < 0 || order > kMaxOrder || points_.size() != (std::size_t{1} << order)) {
    throw std::invalid_argument("constellation size must be 2^order");
  }
}

double LabeledConstellation::min_distance() const {
  if (grid_) return std::abs(grid_gain_);
  return pairwise_min_distance(points_);
}

cdouble LabeledConstellation::mean() const {
  if (points_.empty()) return {};
  cdouble s{};
  for (auto p : points_) s += p;
  return s / static_cast<double>(points_.size());
}

double LabeledConstellation::energy() const {
  if (points_.empty()) return 0.0;
  if (grid_) return std::norm(grid_gain_) * grid_energy(bits_i_, bits_q_);
  long double s = 0.0L;
  for (auto p : points_) s += std::norm(p);
  return static_cast<double>(s / static_cast<long double>(points_.size()));
}

LabeledConstellation build_gray_qam(int m) {
  if (m < 1 || m > kMaxOrder) {
    throw std::invalid_argument("QAM order out of range: " + std::to_string(m));
  }
  const int bi = (m + 1) / 2;
  const int bq = m / 2;
  std::vector<cdouble> pts(std::size_t{1} << m);
  for (std::uint32_t label = 0; label < pts.size(); ++label) {
    const std::uint32_t gi = label >> bq;
    const std::uint32_t gq = label & ((1u << bq) - 1u);
    pts[label] = {axis_coordinate(gi, bi), axis_coordinate(gq, bq)};
  }
  LabeledConstellation c(std::move(pts), m);
  c.grid_ = true;
  c.bits_i_ = bi;
  c.bits_q_ = bq;
  return c;
}

LabeledConstellation scale(const LabeledConstellation& c, cdouble g) {
  if (g == cdouble{}) throw std::invalid_argument("scale factor must be non-zero");
  LabeledConstellation out = c;
  for (auto& p : out.points_) p *= g;
  out.grid_gain_ = c.grid_gain_ * g;
  return out;
}

LabeledConstellation superimpose(std::span<const LabeledConstellation> parts) {
  if (parts.empty()) throw std::invalid_argument("superimpose needs at least one part");
  int total = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (!p.regular()) throw std::invalid_argument("superimpose: part is not a regular unit-d_min QAM");
    if (i + 1 < parts.size() && p.bits_i() != p.bits_q()) {
      throw std::invalid_argument("superimpose: only the last (weakest) part may have odd order");
    }
    total += p.order();
  }
  if (total > kMaxOrder) throw std::invalid_argument("superimpose: cumulative order exceeds 16");
  if (parts.size() == 1) return parts[0];

  // Per-part gain sqrt(2^{sum of stronger orders}) and label shift.
  std::vector<double> gain(parts.size());
  std::vector<int> shift(parts.size());
  int stronger = 0;
  int remaining = total;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    gain[i] = std::sqrt(std::ldexp(1.0, stronger));
    stronger += parts[i].order();
    remaining -= parts[i].order();
    shift[i] = remaining;
  }

  std::vector<cdouble> pts(std::size_t{1} << total);
  for (std::uint32_t label = 0; label < pts.size(); ++label) {
    cdouble s{};
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::uint32_t mask = (1u << parts[i].order()) - 1u;
      s += gain[i] * parts[i].points_[(label >> shift[i]) & mask];
    }
    pts[label] = s;
  }
  LabeledConstellation out(std::move(pts), total);
  out.grid_ = true;
  for (const auto& p : parts) {
    out.bits_i_ += p.bits_i();
    out.bits_q_ += p.bits_q();
  }
  return out;
}

double normalization_factor(int total_order) {
  if (total_order < 1 || total_order > kMaxOrder) {
    throw std::invalid_argument("normalization_factor: order out of range");
  }
  return std::sqrt(6.0 / (std::ldexp(1.0, total_order) - 1.0));
}

double grid_energy(int bits_i, int bits_q) {
  return (std::ldexp(1.0, 2 * bits_i) - 1.0 + std::ldexp(1.0, 2 * bits_q) - 1.0) / 12.0;
}

double unit_energy_gain(int bits_i, int bits_q) {
  if (bits_i == bits_q) return normalization_factor(bits_i + bits_q);
  return 1.0 / std::sqrt(grid_energy(bits_i, bits_q));
}

double pairwise_min_distance(std::span<const cdouble> points) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::min(best, std::norm(points[i] - points[j]));
    }
  }
  return std::sqrt(best);
}

}  // namespace tinbc
