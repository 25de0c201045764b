#include "tinbc/rate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tinbc/parallel.hpp"
#include "tinbc/qfunc.hpp"
#include "tinbc/random.hpp"

namespace tinbc {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr std::uint64_t kChunk = 1024;
// exp(-50) * 4096 terms stays far below double resolution of the dominant term.
constexpr double kPrune = 50.0;

double log_sum_exp(std::span<const double> e) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : e) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : e) {
    if (v > mx - kPrune) s += std::exp(v - mx);
  }
  return mx + std::log(s);
}

struct Moments {
  double sw = 0, sw2 = 0, su = 0, su2 = 0, swu = 0, s3 = 0;
};

// Per-noise-sample quantities: w = tuple mean of i, u = tuple mean of i^2.
struct SampleValue {
  double w = 0;
  double u = 0;
};

class GenericKernel {
public:
  GenericKernel(std::span<const cdouble> desired, std::span<const cdouble> interference, cdouble h)
      : a_(desired.size()), b_(interference.size()), m_(std::log2(static_cast<double>(desired.size()))) {
    hs_.resize(a_ * b_);
    for (std::size_t i = 0; i < a_; ++i) {
      for (std::size_t j = 0; j < b_; ++j) hs_[i * b_ + j] = h * (desired[i] + interference[j]);
    }
  }

  std::size_t tuples() const { return hs_.size(); }

  // Fills dens[t] with the information density of tuple t at noise z.
  void densities(cdouble z, std::vector<double>& scratch, std::vector<double>& dens) const {
    const std::size_t T = hs_.size();
    scratch.resize(T);
    dens.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const cdouble y = z + hs_[t];
      for (std::size_t s = 0; s < T; ++s) scratch[s] = -std::norm(y - hs_[s]);
      const double num = log_sum_exp(scratch);
      const std::size_t row = (t / b_) * b_;
      const double den = log_sum_exp(std::span<const double>(scratch).subspan(row, b_));
      dens[t] = m_ + (den - num) / kLn2;
    }
  }

private:
  std::size_t a_, b_;
  double m_;
  std::vector<cdouble> hs_;
};

// One grid axis of the separable model: desired levels d, interference sum
// levels u (with multiplicity), all pre-multiplied by |h'|.
struct Axis {
  std::vector<double> d;
  std::vector<double> u;
};

class SeparableKernel {
public:
  SeparableKernel(Axis ai, Axis aq, double rotation, double order_bits)
      : ax_{std::move(ai), std::move(aq)}, rot_(std::polar(1.0, -rotation)), m_(order_bits) {}

  // Per-axis tuple values f(d,u) in bits, ordered (d index major).
  void axis_values(int which, double nu, std::vector<double>& scratch, std::vector<double>& den_u,
                   std::vector<double>& out) const {
    const auto& ax = ax_[which];
    const std::size_t A = ax.d.size();
    const std::size_t B = ax.u.size();
    den_u.resize(B);
    for (std::size_t b = 0; b < B; ++b) {
      scratch.resize(B);
      for (std::size_t c = 0; c < B; ++c) {
        const double r = nu + ax.u[b] - ax.u[c];
        scratch[c] = -r * r;
      }
      den_u[b] = log_sum_exp(scratch);
    }
    out.resize(A * B);
    scratch.resize(A * B);
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t b = 0; b < B; ++b) {
        const double pos = nu + ax.d[a] + ax.u[b];
        for (std::size_t a2 = 0; a2 < A; ++a2) {
          for (std::size_t b2 = 0; b2 < B; ++b2) {
            const double r = pos - ax.d[a2] - ax.u[b2];
            scratch[a2 * B + b2] = -r * r;
          }
        }
        out[a * B + b] = (den_u[b] - log_sum_exp(scratch)) / kLn2;
      }
    }
  }

  cdouble rotate(cdouble z) const { return z * rot_; }
  double order_bits() const { return m_; }

private:
  Axis ax_[2];
  cdouble rot_;
  double m_;
};

std::vector<double> axis_levels(const LabeledConstellation& c, bool in_phase, double mag) {
  const int bits = in_phase ? c.bits_i() : c.bits_q();
  const std::size_t L = std::size_t{1} << bits;
  std::vector<double> v(L);
  for (std::size_t p = 0; p < L; ++p) {
    v[p] = mag * (static_cast<double>(p) - (static_cast<double>(L) - 1.0) / 2.0);
  }
  return v;
}

std::vector<double> minkowski(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() * b.size());
  for (double x : a) {
    for (double y : b) out.push_back(x + y);
  }
  return out;
}

std::vector<cdouble> interference_set(std::span<const LabeledConstellation> interferers) {
  std::vector<cdouble> set{cdouble{}};
  for (const auto& c : interferers) {
    std::vector<cdouble> next;
    next.reserve(set.size() * c.size());
    for (auto s : set) {
      for (auto p : c.points()) next.push_back(s + p);
    }
    set = std::move(next);
  }
  return set;
}

bool separable(const LabeledConstellation& desired, std::span<const LabeledConstellation> interferers,
               double& phase) {
  if (!desired.scaled_grid()) return false;
  phase = std::arg(desired.grid_gain());
  for (const auto& c : interferers) {
    if (!c.scaled_grid()) return false;
    const cdouble rel = c.grid_gain() / desired.grid_gain();
    if (std::abs(rel.imag()) > 1e-12 * std::abs(rel) || rel.real() <= 0.0) return false;
  }
  return true;
}

SubBlockRateStats finish(const std::vector<Moments>& parts, std::uint64_t n) {
  Moments m;
  for (const auto& p : parts) {
    m.sw += p.sw;
    m.sw2 += p.sw2;
    m.su += p.su;
    m.su2 += p.su2;
    m.swu += p.swu;
  }
  const double dn = static_cast<double>(n);
  SubBlockRateStats st;
  st.sample_count = n;
  st.mi = m.sw / dn;
  const double second = m.su / dn;
  st.dispersion = std::max(0.0, second - st.mi * st.mi);
  const double var_w = std::max(0.0, m.sw2 / dn - st.mi * st.mi);
  const double var_u = std::max(0.0, m.su2 / dn - second * second);
  const double cov_wu = m.swu / dn - st.mi * second;
  st.std_err_mi = std::sqrt(var_w / dn);
  // Delta method for V = E[u] - E[w]^2.
  const double var_g = std::max(0.0, var_u - 4.0 * st.mi * cov_wu + 4.0 * st.mi * st.mi * var_w);
  st.std_err_dispersion = std::sqrt(var_g / dn);
  return st;
}

}  // namespace

SubBlockRateStats estimate_mi_dispersion(const LabeledConstellation& desired,
                                         std::span<const LabeledConstellation> interferers,
                                         cdouble h, const McOptions& opts) {
  if (opts.samples < 1000) throw std::invalid_argument("estimate_mi_dispersion: need >= 1000 noise samples");
  std::size_t tuples = desired.size();
  for (const auto& c : interferers) tuples *= c.size();
  if (desired.size() == 0 || tuples > kMaxTuples) {
    throw std::invalid_argument("estimate_mi_dispersion: symbol tuple count exceeds 4096");
  }
  const std::uint64_t n = opts.samples;
  if (h == cdouble{}) {
    SubBlockRateStats st;
    st.sample_count = n;
    if (opts.third_moment) st.third_abs_moment = 0.0;
    return st;
  }

  double phase = 0.0;
  const bool can_separate = separable(desired, interferers, phase);
  if (opts.path == McOptions::Path::Separable && !can_separate) {
    throw std::invalid_argument("estimate_mi_dispersion: inputs are not co-phased grids");
  }
  const bool use_separable =
      opts.path == McOptions::Path::Separable || (opts.path == McOptions::Path::Auto && can_separate);

  const ComplexNoise noise(opts.seed);
  const std::uint64_t chunks = (n + kChunk - 1) / kChunk;
  const unsigned workers = opts.workers ? opts.workers : worker_count();
  const double order_bits = std::log2(static_cast<double>(desired.size()));

  // Evaluates fn(sample_value, tuple densities or null) for every sample of a chunk.
  std::vector<Moments> parts(chunks);
  SubBlockRateStats result;

  if (use_separable) {
    const double mag = std::abs(h);
    Axis ai, aq;
    ai.d = axis_levels(desired, true, std::abs(desired.grid_gain()) * mag);
    aq.d = axis_levels(desired, false, std::abs(desired.grid_gain()) * mag);
    ai.u = {0.0};
    aq.u = {0.0};
    for (const auto& c : interferers) {
      ai.u = minkowski(ai.u, axis_levels(c, true, std::abs(c.grid_gain()) * mag));
      aq.u = minkowski(aq.u, axis_levels(c, false, std::abs(c.grid_gain()) * mag));
    }
    const SeparableKernel kernel(std::move(ai), std::move(aq), phase + std::arg(h), order_bits);

    auto run = [&](bool third, double mi) {
      parallel_for(
          chunks,
          [&](std::size_t ch) {
            std::vector<double> scratch, den_u, fi, fq;
            Moments acc;
            const std::uint64_t lo = ch * kChunk;
            const std::uint64_t hi = std::min(n, lo + kChunk);
            for (std::uint64_t s = lo; s < hi; ++s) {
              const cdouble v = kernel.rotate(noise(s));
              kernel.axis_values(0, v.real(), scratch, den_u, fi);
              kernel.axis_values(1, v.imag(), scratch, den_u, fq);
              if (third) {
                double s3 = 0.0;
                for (double x : fi) {
                  for (double y : fq) s3 += std::pow(std::abs(order_bits + x + y - mi), 3);
                }
                acc.s3 += s3 / static_cast<double>(fi.size() * fq.size());
                continue;
              }
              double m1i = 0, m2i = 0, m1q = 0, m2q = 0;
              for (double x : fi) {
                m1i += x;
                m2i += x * x;
              }
              for (double y : fq) {
                m1q += y;
                m2q += y * y;
              }
              m1i /= fi.size();
              m2i /= fi.size();
              m1q /= fq.size();
              m2q /= fq.size();
              const double w = order_bits + m1i + m1q;
              const double u = order_bits * order_bits + m2i + m2q + 2.0 * order_bits * (m1i + m1q) +
                               2.0 * m1i * m1q;
              acc.sw += w;
              acc.sw2 += w * w;
              acc.su += u;
              acc.su2 += u * u;
              acc.swu += w * u;
            }
            parts[ch] = acc;
          },
          workers);
    };
    run(false, 0.0);
    result = finish(parts, n);
    if (opts.third_moment) {
      run(true, result.mi);
      double s3 = 0.0;
      for (const auto& p : parts) s3 += p.s3;
      result.third_abs_moment = s3 / static_cast<double>(n);
    }
    return result;
  }

  const auto pts = desired.points();
  const auto iset = interference_set(interferers);
  const GenericKernel kernel(pts, iset, h);
  auto run = [&](bool third, double mi) {
    parallel_for(
        chunks,
        [&](std::size_t ch) {
          std::vector<double> scratch, dens;
          Moments acc;
          const std::uint64_t lo = ch * kChunk;
          const std::uint64_t hi = std::min(n, lo + kChunk);
          for (std::uint64_t s = lo; s < hi; ++s) {
            kernel.densities(noise(s), scratch, dens);
            const double T = static_cast<double>(dens.size());
            if (third) {
              double s3 = 0.0;
              for (double x : dens) s3 += std::pow(std::abs(x - mi), 3);
              acc.s3 += s3 / T;
              continue;
            }
            double w = 0.0, u = 0.0;
            for (double x : dens) {
              w += x;
              u += x * x;
            }
            w /= T;
            u /= T;
            acc.sw += w;
            acc.sw2 += w * w;
            acc.su += u;
            acc.su2 += u * u;
            acc.swu += w * u;
          }
          parts[ch] = acc;
        },
        workers);
  };
  run(false, 0.0);
  result = finish(parts, n);
  if (opts.third_moment) {
    run(true, result.mi);
    double s3 = 0.0;
    for (const auto& p : parts) s3 += p.s3;
    result.third_abs_moment = s3 / static_cast<double>(n);
  }
  return result;
}

GaussHermiteRule gauss_hermite(int n) {
  if (n < 1 || n > 512) throw std::invalid_argument("gauss_hermite: n must lie in [1, 512]");
  constexpr double kPiM4 = 0.7511255444649425;  // pi^(-1/4)
  // Orthonormal Hermite recurrence; returns p_n(x) and sets d = p_n'(x).
  auto eval = [n](double x, double& d) {
    double p1 = kPiM4, p2 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = x * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
    }
    d = std::sqrt(2.0 * n) * p2;
    return p1;
  };

  GaussHermiteRule r;
  r.nodes.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  // Scan [0, sqrt(2n+1)+1] for sign changes with a step well below the
  // smallest root spacing, then refine each bracket by safeguarded Newton.
  std::vector<double> roots;
  const double step = 0.05 * std::numbers::pi / std::sqrt(2.0 * n + 1.0);
  const double top = std::sqrt(2.0 * n + 1.0) + 1.0;
  double d = 0.0;
  if (n % 2 == 1) roots.push_back(0.0);
  double a = n % 2 == 1 ? 0.5 * step : 0.0;
  double fa = eval(a, d);
  while (a < top && roots.size() < static_cast<std::size_t>((n + 1) / 2)) {
    const double b = a + step;
    const double fb = eval(b, d);
    if ((fa < 0.0) != (fb < 0.0)) {
      double lo = a, hi = b, flo = fa;
      double z = 0.5 * (lo + hi);
      for (int it = 0; it < 100; ++it) {
        const double f = eval(z, d);
        if ((f < 0.0) == (flo < 0.0)) {
          lo = z;
          flo = f;
        } else {
          hi = z;
        }
        double next = z - f / d;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - z) <= 1e-15 * std::max(1.0, z)) {
          z = next;
          break;
        }
        z = next;
      }
      roots.push_back(z);
    }
    a = b;
    fa = fb;
  }
  if (roots.size() != static_cast<std::size_t>((n + 1) / 2)) {
    throw std::runtime_error("gauss_hermite: root scan failed");
  }
  std::size_t lo_i = 0;
  std::size_t hi_i = n - 1;
  for (auto it = roots.rbegin(); it != roots.rend(); ++it) {
    eval(*it, d);
    const double w = 2.0 / (d * d);
    r.nodes[lo_i] = -*it;
    r.nodes[hi_i] = *it;
    r.weights[lo_i++] = w;
    r.weights[hi_i--] = w;
  }
  return r;
}

double quadrature_mi(const LabeledConstellation& c, cdouble h, int nodes) {
  if (c.size() == 0 || c.size() > 256) throw std::invalid_argument("quadrature_mi: at most 256 points");
  if (nodes < 64) throw std::invalid_argument("quadrature_mi: at least 64 nodes per dimension");
  if (h == cdouble{}) return 0.0;
  const auto rule = gauss_hermite(nodes);
  const auto pts = c.points();
  const std::size_t M = pts.size();
  std::vector<double> e(M);
  double total = 0.0;
  for (std::size_t a = 0; a < M; ++a) {
    double acc = 0.0;
    for (int i = 0; i < nodes; ++i) {
      for (int j = 0; j < nodes; ++j) {
        const cdouble z{rule.nodes[i], rule.nodes[j]};
        for (std::size_t b = 0; b < M; ++b) {
          const cdouble delta = h * (pts[a] - pts[b]);
          // -|z + delta|^2 + |z|^2
          e[b] = -std::norm(delta) - 2.0 * (z.real() * delta.real() + z.imag() * delta.imag());
        }
        acc += rule.weights[i] * rule.weights[j] * log_sum_exp(e);
      }
    }
    total += acc / std::numbers::pi;
  }
  return std::log2(static_cast<double>(M)) - total / (static_cast<double>(M) * kLn2);
}

SecondOrderRate second_order_rate(std::span<const BlockTerm> blocks, double eps, int blocklength) {
  if (!(eps > 0.0 && eps <= 0.5)) throw std::invalid_argument("second_order_rate: eps must lie in (0, 0.5]");
  if (blocklength < 1) throw std::invalid_argument("second_order_rate: blocklength must be positive");
  double sum_i = 0.0, sum_v = 0.0;
  for (const auto& b : blocks) {
    if (!std::isfinite(b.mi) || !std::isfinite(b.dispersion) || b.dispersion < 0.0) {
      throw std::invalid_argument("second_order_rate: non-finite or negative stats");
    }
    sum_i += b.length * b.mi;
    sum_v += b.length * b.dispersion;
  }
  SecondOrderRate r;
  r.first_order = sum_i / blocklength;
  r.penalty = std::sqrt(sum_v) * qfunc_inv(eps) / blocklength;
  r.rate = r.first_order - r.penalty;
  r.non_positive = r.rate <= 0.0;
  return r;
}

double single_block_rate(double mi, double dispersion, int blocklength, double eps) {
  return mi - std::sqrt(dispersion / blocklength) * qfunc_inv(eps);
}

double two_block_rate(double mi_1, double disp_1, double mi_2, double disp_2, int n1, int n2, double eps) {
  const double n1d = n1;
  const double n2d = n2;
  return n1d / n2d * mi_1 + (n2d - n1d) / n2d * mi_2 -
         std::sqrt(n1d * disp_1 + (n2d - n1d) * disp_2) / n2d * qfunc_inv(eps);
}

double berry_esseen_constant(std::span<const BlockTerm> blocks, std::span<const SubBlockRateStats> stats,
                             int blocklength) {
  if (blocks.size() != stats.size()) throw std::invalid_argument("berry_esseen_constant: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const double w = static_cast<double>(blocks[j].length) / blocklength;
    if (w == 0.0) continue;
    num += w * stats[j].third_abs_moment;
    den += w * blocks[j].dispersion;
  }
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  return kBerryEsseenC0 * num / std::pow(den, 1.5);
}

SubBlockRateStats plan_block_stats(const SchemePlan& plan, int user, int block, const McOptions& opts) {
  const int m = plan.orders.at(user).at(block);
  if (m == 0 || plan.layout.blocks.at(block).length == 0) {
    SubBlockRateStats st;
    if (opts.third_moment) st.third_abs_moment = 0.0;
    return st;
  }
  const auto desired = plan.effective_constellation(user, block);
  const auto others = plan.interferers(user, block);
  return estimate_mi_dispersion(desired, others, plan.spec.users[user].h, opts);
}

RateResult evaluate_plan(const SchemePlan& plan, const McOptions& opts) {
  RateResult res;
  const int K = static_cast<int>(plan.spec.users.size());
  for (int k = 0; k < K; ++k) {
    UserRate ur;
    ur.user = k;
    ur.eps = plan.spec.users[k].eps;
    ur.blocklength = plan.spec.users[k].blocklength;
    for (int j = 0; j <= plan.layout.position[k]; ++j) {
      const auto st = plan_block_stats(plan, k, j, opts);
      ur.terms.push_back({plan.layout.blocks[j].length, st.mi, st.dispersion});
      ur.stats.push_back(st);
    }
    const auto r = second_order_rate(ur.terms, ur.eps, ur.blocklength);
    ur.rate = r.rate;
    ur.first_order = r.first_order;
    ur.non_positive = r.non_positive;
    if (opts.third_moment) ur.berry_esseen = berry_esseen_constant(ur.terms, ur.stats, ur.blocklength);
    res.users.push_back(std::move(ur));
  }
  return res;
}

}  // namespace tinbc
