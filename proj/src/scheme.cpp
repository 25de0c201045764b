#include "tinbc/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tinbc {

namespace {

// floor(log2(x)) with a small guard against log2 rounding just below an
// integer when x is an exact power of two.
int floor_log2(double x) { return static_cast<int>(std::floor(std::log2(x) + 1e-12)); }

struct Axes {
  int bits_i = 0;
  int bits_q = 0;
};

Axes axes_of(int m) { return {(m + 1) / 2, m / 2}; }

}  // namespace

void validate(const SystemSpec& spec) {
  if (!(spec.power > 0.0) || !std::isfinite(spec.power)) {
    throw std::invalid_argument("total power P must be positive");
  }
  if (spec.users.empty()) throw std::invalid_argument("at least one user is required");
  for (std::size_t k = 0; k < spec.users.size(); ++k) {
    const auto& u = spec.users[k];
    const std::string who = "user " + std::to_string(k + 1);
    if (u.blocklength < 1) throw std::invalid_argument(who + ": blocklength must be >= 1");
    if (!(u.eps > 0.0 && u.eps < 0.5)) throw std::invalid_argument(who + ": eps must lie in (0, 0.5)");
    if (!(std::abs(u.h) > 0.0) || !std::isfinite(std::abs(u.h))) {
      throw std::invalid_argument(who + ": channel must be non-zero");
    }
    for (std::size_t l = 0; l < k; ++l) {
      if (std::abs(spec.users[l].h) == std::abs(u.h)) {
        throw std::invalid_argument("users " + std::to_string(l + 1) + " and " + std::to_string(k + 1) +
                                    " have equal channel magnitudes; ranking is undefined");
      }
    }
  }
}

int SubBlockLayout::rank_of(int user, int block) const {
  const auto& r = blocks.at(block).ranking;
  const auto it = std::find(r.begin(), r.end(), user);
  if (it == r.end()) throw std::out_of_range("user does not participate in sub-block");
  return static_cast<int>(it - r.begin());
}

SubBlockLayout build_layout(const SystemSpec& spec) {
  validate(spec);
  const int K = static_cast<int>(spec.users.size());
  SubBlockLayout layout;
  layout.sorted_users.resize(K);
  std::iota(layout.sorted_users.begin(), layout.sorted_users.end(), 0);
  std::stable_sort(layout.sorted_users.begin(), layout.sorted_users.end(), [&](int a, int b) {
    return spec.users[a].blocklength < spec.users[b].blocklength;
  });
  layout.position.resize(K);
  for (int p = 0; p < K; ++p) {
    layout.position[layout.sorted_users[p]] = p;
    if (layout.sorted_users[p] != p) layout.reordered = true;
  }

  int prev_end = 0;
  for (int j = 0; j < K; ++j) {
    SubBlock b;
    const int end = spec.users[layout.sorted_users[j]].blocklength;
    b.start = prev_end;
    b.length = end - prev_end;
    for (int p = j; p < K; ++p) b.participants.push_back(layout.sorted_users[p]);
    std::sort(b.participants.begin(), b.participants.end());
    b.ranking = b.participants;
    std::sort(b.ranking.begin(), b.ranking.end(),
              [&](int a, int c) { return std::abs(spec.users[a].h) > std::abs(spec.users[c].h); });
    layout.blocks.push_back(std::move(b));
    prev_end = end;
  }
  layout.frame_length = prev_end;
  return layout;
}

OrderMatrix empty_orders(const SubBlockLayout& layout) {
  OrderMatrix m(layout.position.size());
  for (std::size_t k = 0; k < m.size(); ++k) m[k].assign(layout.position[k] + 1, 0);
  return m;
}

namespace {

void check_shape(const OrderMatrix& orders, const SubBlockLayout& layout) {
  if (orders.size() != layout.position.size()) {
    throw std::invalid_argument("order matrix has wrong number of users");
  }
  for (std::size_t k = 0; k < orders.size(); ++k) {
    if (orders[k].size() != static_cast<std::size_t>(layout.position[k] + 1)) {
      throw std::invalid_argument("user " + std::to_string(k + 1) + " needs " +
                                  std::to_string(layout.position[k] + 1) + " sub-block orders");
    }
  }
}

}  // namespace

std::vector<const ConstraintCheck*> FeasibilityReport::violations() const {
  std::vector<const ConstraintCheck*> out;
  for (const auto& c : checks) {
    if (!c.satisfied) out.push_back(&c);
  }
  return out;
}

FeasibilityReport check_modulation_constraints(const OrderMatrix& orders, const SystemSpec& spec,
                                               const SubBlockLayout& layout, int max_block_order) {
  check_shape(orders, layout);
  FeasibilityReport report;
  auto add = [&](ConstraintCheck c) {
    if (!c.satisfied) report.feasible = false;
    report.checks.push_back(c);
  };

  for (std::size_t j = 0; j < layout.blocks.size(); ++j) {
    const auto& blk = layout.blocks[j];
    if (blk.length == 0) continue;
    const int n = static_cast<int>(blk.ranking.size());
    std::vector<int> m(n);
    for (int i = 0; i < n; ++i) m[i] = orders[blk.ranking[i]][j];

    const int total = std::accumulate(m.begin(), m.end(), 0);
    bool range_ok = total <= max_block_order;
    for (int i = 0; i < n; ++i) {
      if (m[i] < 0 || m[i] > kMaxOrder) {
        range_ok = false;
        ConstraintCheck c;
        c.kind = ConstraintCheck::Kind::OrderRange;
        c.block = static_cast<int>(j);
        c.rank = i;
        c.user = blk.ranking[i];
        c.lhs = m[i];
        c.rhs = kMaxOrder;
        c.satisfied = false;
        add(c);
      }
    }
    if (total > max_block_order) {
      ConstraintCheck c;
      c.kind = ConstraintCheck::Kind::OrderRange;
      c.block = static_cast<int>(j);
      c.lhs = total;
      c.rhs = max_block_order;
      c.satisfied = false;
      add(c);
    }
    if (!range_ok) continue;

    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
      if (m[i] > 0) active.push_back(i);
    }
    const int top = active.empty() ? -1 : active.front();

    for (std::size_t a = 0; a + 1 < active.size(); ++a) {
      const int i = active[a];
      if (m[i] % 2 != 0) {
        ConstraintCheck c;
        c.kind = ConstraintCheck::Kind::Regularity;
        c.block = static_cast<int>(j);
        c.rank = i;
        c.user = blk.ranking[i];
        c.lhs = m[i];
        c.satisfied = false;
        add(c);
      }
    }

    for (int i = 0; i < n; ++i) {
      const int user = blk.ranking[i];
      const double gain2 = std::norm(spec.users[user].h);
      const bool is_top = (i == top);
      const double arg = 6.0 * spec.power * gain2 + (is_top ? 1.0 : 0.0);
      ConstraintCheck c;
      c.kind = ConstraintCheck::Kind::SumOrder;
      c.block = static_cast<int>(j);
      c.rank = i;
      c.user = user;
      c.lhs = std::accumulate(m.begin() + i, m.end(), 0);
      c.rhs = floor_log2(arg);
      c.margin = std::log2(arg) - c.lhs;
      c.top_rank = is_top;
      c.vacuous = (m[i] == 0);
      c.satisfied = c.vacuous || c.lhs <= c.rhs;
      add(c);
    }

    // The floor-log bounds assume the square-QAM energy (2^t - 1)/6. A
    // rectangular superimposed grid (odd total) carries more energy for the
    // same spacing, so its distances are checked with the exact energy.
    if (total % 2 != 0) {
      int bi = 0;
      int bq = 0;
      for (int i : active) {
        const Axes ax = axes_of(m[i]);
        bi += ax.bits_i;
        bq += ax.bits_q;
      }
      const double eta = unit_energy_gain(bi, bq);
      int stronger = 0;
      for (int i : active) {
        const int user = blk.ranking[i];
        const double d2 =
            eta * eta * std::ldexp(1.0, stronger) * spec.power * std::norm(spec.users[user].h);
        ConstraintCheck c;
        c.kind = ConstraintCheck::Kind::ExactDistance;
        c.block = static_cast<int>(j);
        c.rank = i;
        c.user = user;
        c.margin = std::sqrt(d2) - 1.0;
        c.satisfied = d2 >= 1.0 - 1e-12;
        add(c);
        stronger += m[i];
      }
    }
  }
  return report;
}

LabeledConstellation SchemePlan::unit_constellation(int user, int block) const {
  return build_gray_qam(orders.at(user).at(block));
}

LabeledConstellation SchemePlan::effective_constellation(int user, int block) const {
  return scale(unit_constellation(user, block), assignment.at(user).at(block).scale);
}

std::vector<LabeledConstellation> SchemePlan::interferers(int user, int block) const {
  std::vector<LabeledConstellation> out;
  for (int other : layout.blocks.at(block).ranking) {
    if (other == user || orders[other][block] == 0) continue;
    out.push_back(effective_constellation(other, block));
  }
  return out;
}

SchemePlan assign_power(const OrderMatrix& orders, const SystemSpec& spec,
                        const SubBlockLayout& layout) {
  const auto report = check_modulation_constraints(orders, spec, layout);
  if (!report.feasible) throw std::invalid_argument("infeasible modulation orders");

  const int K = static_cast<int>(spec.users.size());
  SchemePlan plan;
  plan.spec = spec;
  plan.layout = layout;
  plan.orders = orders;
  plan.blocks.resize(layout.blocks.size());
  plan.assignment.resize(K);
  for (int k = 0; k < K; ++k) plan.assignment[k].resize(layout.position[k] + 1);

  for (std::size_t j = 0; j < layout.blocks.size(); ++j) {
    const auto& blk = layout.blocks[j];
    auto& bp = plan.blocks[j];
    for (int user : blk.ranking) {
      const Axes ax = axes_of(orders[user][j]);
      bp.total_order += orders[user][j];
      bp.bits_i += ax.bits_i;
      bp.bits_q += ax.bits_q;
    }
    if (bp.total_order == 0 || blk.length == 0) {
      for (int i = 0; i < static_cast<int>(blk.ranking.size()); ++i) {
        plan.assignment[blk.ranking[i]][j].order = orders[blk.ranking[i]][j];
        plan.assignment[blk.ranking[i]][j].rank = i;
      }
      continue;
    }
    bp.eta = unit_energy_gain(bp.bits_i, bp.bits_q);
    const double block_power = spec.power;

    int stronger = 0;
    for (int i = 0; i < static_cast<int>(blk.ranking.size()); ++i) {
      const int user = blk.ranking[i];
      const int m = orders[user][j];
      auto& a = plan.assignment[user][j];
      a.order = m;
      a.rank = i;
      if (m > 0) {
        const Axes ax = axes_of(m);
        a.scale = bp.eta * std::sqrt(std::ldexp(1.0, stronger) * block_power);
        a.power = a.scale * a.scale * grid_energy(ax.bits_i, ax.bits_q);
        bp.power += a.power;
      }
      stronger += m;
    }
  }

  plan.user_power.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (int j = 0; j <= layout.position[k]; ++j) {
      acc += layout.blocks[j].length * plan.assignment[k][j].power;
    }
    plan.user_power[k] = acc / spec.users[k].blocklength;
  }
  plan.codeword_length = codeword_lengths(orders, layout);
  return plan;
}

DistanceReport verify_min_distances(const SchemePlan& plan) {
  DistanceReport rep;
  const auto& layout = plan.layout;
  auto record = [&](DistanceEntry e) {
    if (e.d_min < 1.0 - 1e-9) rep.all_at_least_one = false;
    rep.entries.push_back(e);
  };
  for (std::size_t j = 0; j < layout.blocks.size(); ++j) {
    const auto& blk = layout.blocks[j];
    if (blk.length == 0 || plan.blocks[j].total_order == 0) continue;

    std::vector<LabeledConstellation> parts;
    int strongest = -1;
    for (int user : blk.ranking) {
      if (plan.orders[user][j] == 0) continue;
      if (strongest < 0) strongest = user;
      parts.push_back(plan.unit_constellation(user, static_cast<int>(j)));
      const auto eff = plan.effective_constellation(user, static_cast<int>(j));
      record({DistanceEntry::Kind::Individual, user, static_cast<int>(j),
              std::abs(plan.spec.users[user].h) * eff.min_distance()});
    }
    const auto sup = scale(superimpose(parts), plan.blocks[j].eta * std::sqrt(plan.spec.power) *
                                                   plan.spec.users[strongest].h);
    record({DistanceEntry::Kind::Superimposed, strongest, static_cast<int>(j), sup.min_distance()});
  }
  return rep;
}

std::vector<int> codeword_lengths(const OrderMatrix& orders, const SubBlockLayout& layout) {
  check_shape(orders, layout);
  std::vector<int> n(orders.size(), 0);
  for (std::size_t k = 0; k < orders.size(); ++k) {
    for (std::size_t j = 0; j < orders[k].size(); ++j) {
      n[k] += layout.blocks[j].length * orders[k][j];
    }
  }
  return n;
}

std::vector<cdouble> map_bits(std::span<const std::uint8_t> bits, int user, const SchemePlan& plan) {
  const auto& layout = plan.layout;
  if (bits.size() != static_cast<std::size_t>(plan.codeword_length.at(user))) {
    throw std::invalid_argument("map_bits: expected " + std::to_string(plan.codeword_length[user]) +
                                " bits, got " + std::to_string(bits.size()));
  }
  std::vector<cdouble> out(plan.spec.users[user].blocklength);
  std::size_t pos = 0;
  for (int j = 0; j <= layout.position[user]; ++j) {
    const auto& blk = layout.blocks[j];
    const int m = plan.orders[user][j];
    if (m == 0 || blk.length == 0) continue;
    const auto c = plan.unit_constellation(user, j);
    for (int t = 0; t < blk.length; ++t) {
      std::uint32_t label = 0;
      for (int b = 0; b < m; ++b) {
        const std::uint8_t bit = bits[pos++];
        if (bit > 1) throw std::invalid_argument("map_bits: bits must be 0 or 1");
        label = (label << 1) | bit;
      }
      out[blk.start + t] = c.point(label);
    }
  }
  return out;
}

std::vector<std::uint8_t> demap_hard(std::span<const cdouble> symbols, int user,
                                     const SchemePlan& plan) {
  const auto& layout = plan.layout;
  if (symbols.size() != static_cast<std::size_t>(plan.spec.users.at(user).blocklength)) {
    throw std::invalid_argument("demap_hard: symbol count mismatch");
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(plan.codeword_length[user]);
  for (int j = 0; j <= layout.position[user]; ++j) {
    const auto& blk = layout.blocks[j];
    const int m = plan.orders[user][j];
    if (m == 0 || blk.length == 0) continue;
    const auto c = plan.unit_constellation(user, j);
    const auto pts = c.points();
    for (int t = 0; t < blk.length; ++t) {
      const cdouble s = symbols[blk.start + t];
      std::uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::uint32_t l = 0; l < pts.size(); ++l) {
        const double d = std::norm(s - pts[l]);
        if (d < best_d) {
          best_d = d;
          best = l;
        }
      }
      for (int b = 0; b < m; ++b) bits.push_back(static_cast<std::uint8_t>(c.label_bit(best, b)));
    }
  }
  return bits;
}

Frame build_frame(const std::vector<std::vector<cdouble>>& unit_symbols, const SchemePlan& plan) {
  const auto& layout = plan.layout;
  if (unit_symbols.size() != plan.spec.users.size()) {
    throw std::invalid_argument("build_frame: one symbol vector per user is required");
  }
  Frame f;
  f.x.assign(layout.frame_length, cdouble{});
  f.per_user.resize(unit_symbols.size());
  for (std::size_t k = 0; k < unit_symbols.size(); ++k) {
    if (unit_symbols[k].size() != static_cast<std::size_t>(plan.spec.users[k].blocklength)) {
      throw std::invalid_argument("build_frame: symbol vector length must equal N_k");
    }
    auto& xk = f.per_user[k];
    xk.assign(unit_symbols[k].size(), cdouble{});
    for (int j = 0; j <= layout.position[k]; ++j) {
      const auto& blk = layout.blocks[j];
      const double g = plan.assignment[k][j].scale;
      for (int t = blk.start; t < blk.start + blk.length; ++t) {
        xk[t] = g * unit_symbols[k][t];
        f.x[t] += xk[t];
      }
    }
  }
  return f;
}

std::string to_string(ConstraintCheck::Kind kind) {
  switch (kind) {
    case ConstraintCheck::Kind::SumOrder: return "sum_order";
    case ConstraintCheck::Kind::OrderRange: return "order_range";
    case ConstraintCheck::Kind::Regularity: return "regularity";
    case ConstraintCheck::Kind::ExactDistance: return "exact_distance";
  }
  return "unknown";
}

}  // namespace tinbc
