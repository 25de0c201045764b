#include "tinbc/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "tinbc/benchmark.hpp"
#include "tinbc/parallel.hpp"

namespace tinbc {

namespace {

OrderMatrix with_block(const SubBlockLayout& layout, int block, const std::vector<int>& vec) {
  OrderMatrix o = empty_orders(layout);
  const auto& parts = layout.blocks[block].participants;
  for (std::size_t p = 0; p < parts.size(); ++p) o[parts[p]][block] = vec[p];
  return o;
}

bool block_feasible(const SystemSpec& spec, const SubBlockLayout& layout, int block,
                    const std::vector<int>& vec, int cap) {
  const auto rep = check_modulation_constraints(with_block(layout, block, vec), spec, layout, cap);
  return rep.feasible;
}

}  // namespace

std::vector<std::vector<int>> feasible_block_orders(const SystemSpec& spec, const SubBlockLayout& layout,
                                                    int block, int max_block_order) {
  const auto& parts = layout.blocks.at(block).participants;
  std::vector<std::vector<int>> out;
  std::vector<int> cur(parts.size(), 0);
  if (layout.blocks[block].length == 0) {
    out.push_back(cur);
    return out;
  }
  auto rec = [&](auto&& self, std::size_t idx, int left) -> void {
    if (idx == parts.size()) {
      if (block_feasible(spec, layout, block, cur, max_block_order)) out.push_back(cur);
      return;
    }
    for (int m = 0; m <= left; ++m) {
      cur[idx] = m;
      self(self, idx + 1, left - m);
    }
    cur[idx] = 0;
  };
  rec(rec, 0, max_block_order);
  return out;
}

DesignResult design_search(const SystemSpec& spec, const DesignOptions& opts) {
  validate(spec);
  const auto layout = build_layout(spec);
  const int K = static_cast<int>(spec.users.size());
  const int J = static_cast<int>(layout.blocks.size());
  std::vector<double> weights = opts.weights.empty() ? std::vector<double>(K, 1.0) : opts.weights;
  if (static_cast<int>(weights.size()) != K) throw std::invalid_argument("design_search: one weight per user");

  std::vector<std::vector<std::vector<int>>> per_block(J);
  for (int j = 0; j < J; ++j) per_block[j] = feasible_block_orders(spec, layout, j, opts.max_block_order);

  // Statistics for every (block, order vector, participant) that is active.
  struct Job {
    int block;
    std::size_t vec;
    int user;
  };
  std::vector<Job> jobs;
  for (int j = 0; j < J; ++j) {
    const auto& parts = layout.blocks[j].participants;
    for (std::size_t v = 0; v < per_block[j].size(); ++v) {
      for (std::size_t p = 0; p < parts.size(); ++p) {
        if (per_block[j][v][p] > 0) jobs.push_back({j, v, parts[p]});
      }
    }
  }
  std::vector<SubBlockRateStats> job_stats(jobs.size());
  const unsigned workers = opts.mc.workers ? opts.mc.workers : worker_count();
  McOptions inner = opts.mc;
  inner.workers = jobs.size() > 1 ? 1 : workers;
  parallel_for(
      jobs.size(),
      [&](std::size_t i) {
        const auto& jb = jobs[i];
        const auto plan = assign_power(with_block(layout, jb.block, per_block[jb.block][jb.vec]), spec, layout);
        job_stats[i] = plan_block_stats(plan, jb.user, jb.block, inner);
      },
      jobs.size() > 1 ? workers : 1);
  std::map<std::tuple<int, std::size_t, int>, std::size_t> lookup;
  for (std::size_t i = 0; i < jobs.size(); ++i) lookup[{jobs[i].block, jobs[i].vec, jobs[i].user}] = i;

  DesignResult res;
  std::vector<std::size_t> pick(J, 0);
  for (;;) {
    OrderMatrix orders = empty_orders(layout);
    for (int j = 0; j < J; ++j) {
      const auto& parts = layout.blocks[j].participants;
      for (std::size_t p = 0; p < parts.size(); ++p) orders[parts[p]][j] = per_block[j][pick[j]][p];
    }
    const auto n = codeword_lengths(orders, layout);
    const bool served = std::all_of(n.begin(), n.end(), [](int v) { return v > 0; });
    if (served || opts.allow_unserved) {
      DesignCandidate c;
      c.orders = orders;
      c.feasibility = check_modulation_constraints(orders, spec, layout, opts.max_block_order);
      c.plan = assign_power(orders, spec, layout);
      c.codeword_length = n;
      for (int k = 0; k < K; ++k) {
        UserRate ur;
        ur.user = k;
        ur.eps = spec.users[k].eps;
        ur.blocklength = spec.users[k].blocklength;
        for (int j = 0; j <= layout.position[k]; ++j) {
          SubBlockRateStats st;
          if (orders[k][j] > 0) st = job_stats[lookup.at({j, pick[j], k})];
          ur.terms.push_back({layout.blocks[j].length, st.mi, st.dispersion});
          ur.stats.push_back(st);
        }
        const auto r = second_order_rate(ur.terms, ur.eps, ur.blocklength);
        ur.rate = r.rate;
        ur.first_order = r.first_order;
        ur.non_positive = r.non_positive;
        if (opts.mc.third_moment) ur.berry_esseen = berry_esseen_constant(ur.terms, ur.stats, ur.blocklength);
        c.score += weights[k] * ur.rate;
        c.info_bits.push_back(ur.rate > 0.0 ? static_cast<int>(std::floor(ur.rate * ur.blocklength)) : 0);
        c.rates.users.push_back(std::move(ur));
      }
      res.candidates.push_back(std::move(c));
    }
    int j = 0;
    for (; j < J; ++j) {
      if (++pick[j] < per_block[j].size()) break;
      pick[j] = 0;
    }
    if (j == J) break;
  }

  std::vector<std::vector<double>> rate_rows;
  for (const auto& c : res.candidates) {
    std::vector<double> row;
    for (const auto& u : c.rates.users) row.push_back(u.rate);
    rate_rows.push_back(std::move(row));
  }
  for (auto i : pareto_front(rate_rows, weights)) res.candidates[i].pareto = true;
  if (opts.pareto_only) {
    std::erase_if(res.candidates, [](const DesignCandidate& c) { return !c.pareto; });
  }
  std::stable_sort(res.candidates.begin(), res.candidates.end(),
                   [](const DesignCandidate& a, const DesignCandidate& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.orders < b.orders;
                   });
  if (res.candidates.empty()) {
    res.explanation = "no feasible order matrix serves every user: each sub-block order constraint "
                      "floor(log2(6 P |h|^2)) is too small at this power";
  }
  return res;
}

}  // namespace tinbc
