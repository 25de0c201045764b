#include "tinbc/link.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "tinbc/random.hpp"

namespace tinbc {

namespace {

double log_sum_exp(std::span<const double> e) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : e) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : e) s += std::exp(v - mx);
  return mx + std::log(s);
}

double combine(double a, double b, LlrMode mode) {
  if (mode == LlrMode::MaxLog) return std::max(a, b);
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(-std::abs(a - b)));
}

// Received-point geometry of user k in sub-block j: h d_a and h u_b.
struct BlockModel {
  int order = 0;
  std::vector<cdouble> desired;       // h d_a, label order
  std::vector<cdouble> interference;  // h u_b over all interferer tuples
};

BlockModel block_model(int user, int block, const SchemePlan& plan) {
  BlockModel bm;
  bm.order = plan.orders.at(user).at(block);
  if (bm.order == 0) return bm;
  const cdouble h = plan.spec.users[user].h;
  const auto d = plan.effective_constellation(user, block);
  std::vector<cdouble> u{cdouble{}};
  for (const auto& c : plan.interferers(user, block)) {
    std::vector<cdouble> next;
    next.reserve(u.size() * c.size());
    for (auto s : u) {
      for (auto p : c.points()) next.push_back(s + p);
    }
    u = std::move(next);
  }
  if (d.size() * u.size() > kMaxTuples) throw std::invalid_argument("tin_llr: symbol tuple count exceeds 4096");
  for (auto p : d.points()) bm.desired.push_back(h * p);
  for (auto p : u) bm.interference.push_back(h * p);
  return bm;
}

// Per-label log-likelihoods (up to a common constant) of one received symbol.
void label_metrics(const BlockModel& bm, cdouble y, double noise_var, LlrMode mode, std::vector<double>& scratch,
                   std::vector<double>& out) {
  out.resize(bm.desired.size());
  scratch.resize(bm.interference.size());
  for (std::size_t a = 0; a < bm.desired.size(); ++a) {
    for (std::size_t b = 0; b < bm.interference.size(); ++b) {
      scratch[b] = -std::norm(y - bm.desired[a] - bm.interference[b]) / noise_var;
    }
    out[a] = mode == LlrMode::MaxLog ? *std::max_element(scratch.begin(), scratch.end()) : log_sum_exp(scratch);
  }
}

void append_llrs(const BlockModel& bm, std::span<const cdouble> y, LlrMode mode, double noise_var,
                 std::vector<double>& llr) {
  std::vector<double> scratch, metric;
  const double ninf = -std::numeric_limits<double>::infinity();
  for (auto sample : y) {
    label_metrics(bm, sample, noise_var, mode, scratch, metric);
    for (int bit = 0; bit < bm.order; ++bit) {
      const int shift = bm.order - 1 - bit;
      double zero = ninf, one = ninf;
      for (std::size_t a = 0; a < metric.size(); ++a) {
        if ((a >> shift) & 1u) {
          one = combine(one, metric[a], mode);
        } else {
          zero = combine(zero, metric[a], mode);
        }
      }
      llr.push_back(zero - one);
    }
  }
}

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; i += 64) {
    const std::uint64_t w = splitmix64(seed ^ splitmix64(i / 64));
    for (std::size_t b = 0; b < 64 && i + b < n; ++b) bits[i + b] = static_cast<std::uint8_t>((w >> b) & 1u);
  }
  return bits;
}

std::vector<std::vector<std::uint8_t>> random_payloads(const SchemePlan& plan, std::uint64_t seed) {
  std::vector<std::vector<std::uint8_t>> p;
  for (std::size_t k = 0; k < plan.codeword_length.size(); ++k) {
    p.push_back(random_bits(plan.codeword_length[k], derive_seed(seed, k)));
  }
  return p;
}

}  // namespace

SimulatedFrame simulate_frame(const SchemePlan& plan, const std::vector<std::vector<std::uint8_t>>& payload,
                              const ChannelOptions& opts) {
  const std::size_t K = plan.spec.users.size();
  if (payload.size() != K) throw std::invalid_argument("simulate_frame: one payload per user");
  std::vector<std::vector<cdouble>> unit(K);
  for (std::size_t k = 0; k < K; ++k) unit[k] = map_bits(payload[k], static_cast<int>(k), plan);
  SimulatedFrame out;
  out.tx = build_frame(unit, plan);
  out.rx.seed = opts.seed;
  for (std::size_t k = 0; k < K; ++k) {
    const cdouble h = plan.spec.users[k].h;
    const ComplexNoise noise(derive_seed(opts.seed, k));
    const int n = plan.spec.users[k].blocklength;
    std::vector<cdouble> y(n);
    for (int j = 0; j < n; ++j) {
      y[j] = h * out.tx.x[j];
      if (opts.noise_std != 0.0) y[j] += opts.noise_std * noise(static_cast<std::uint64_t>(j));
    }
    out.rx.y.push_back(std::move(y));
    out.rx.h.push_back(h);
  }
  return out;
}

std::vector<double> tin_llr(std::span<const cdouble> y, int user, int block, const SchemePlan& plan, LlrMode mode,
                            double noise_var) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("tin_llr: noise variance must be positive");
  if (y.size() != static_cast<std::size_t>(plan.layout.blocks.at(block).length)) {
    throw std::invalid_argument("tin_llr: segment length does not match the sub-block");
  }
  std::vector<double> llr;
  const auto bm = block_model(user, block, plan);
  if (bm.order == 0) return llr;
  llr.reserve(y.size() * bm.order);
  append_llrs(bm, y, mode, noise_var, llr);
  return llr;
}

std::vector<double> symbol_log_posteriors(cdouble y, int user, int block, const SchemePlan& plan,
                                          double noise_var) {
  const auto bm = block_model(user, block, plan);
  if (bm.order == 0) throw std::invalid_argument("symbol_log_posteriors: user is silent in this sub-block");
  std::vector<double> scratch, metric;
  label_metrics(bm, y, noise_var, LlrMode::Exact, scratch, metric);
  const double norm = log_sum_exp(metric);
  for (auto& v : metric) v -= norm;
  return metric;
}

std::vector<double> frame_llr(std::span<const cdouble> y, int user, const SchemePlan& plan, LlrMode mode,
                              double noise_var) {
  if (y.size() != static_cast<std::size_t>(plan.spec.users.at(user).blocklength)) {
    throw std::invalid_argument("frame_llr: expected N_k received symbols");
  }
  std::vector<double> llr;
  llr.reserve(plan.codeword_length[user]);
  for (int j = 0; j <= plan.layout.position[user]; ++j) {
    const auto& blk = plan.layout.blocks[j];
    if (blk.length == 0) continue;
    const auto bm = block_model(user, j, plan);
    if (bm.order == 0) continue;
    append_llrs(bm, y.subspan(blk.start, blk.length), mode, noise_var, llr);
  }
  return llr;
}

std::vector<std::uint8_t> hard_decisions(std::span<const double> llr) {
  std::vector<std::uint8_t> bits(llr.size());
  for (std::size_t i = 0; i < llr.size(); ++i) bits[i] = llr[i] >= 0.0 ? 0 : 1;
  return bits;
}

BerResult uncoded_ber(const SchemePlan& plan, int user, double snr_offset_db, std::uint64_t min_bits,
                      std::uint64_t seed, LlrMode mode) {
  if (plan.codeword_length.at(user) == 0) throw std::invalid_argument("uncoded_ber: user carries no bits");
  ChannelOptions ch;
  ch.noise_std = std::pow(10.0, -snr_offset_db / 20.0);
  BerResult res;
  for (std::uint64_t f = 0; res.bits < min_bits; ++f) {
    const auto payload = random_payloads(plan, derive_seed(seed, 2 * f));
    ch.seed = derive_seed(seed, 2 * f + 1);
    const auto sim = simulate_frame(plan, payload, ch);
    const auto dec = hard_decisions(frame_llr(sim.rx.y[user], user, plan, mode, ch.noise_std * ch.noise_std));
    for (std::size_t i = 0; i < dec.size(); ++i) res.errors += dec[i] != payload[user][i];
    res.bits += dec.size();
  }
  return res;
}

IdCheckReport empirical_id_check(const SchemePlan& plan, int user, int n_frames, std::uint64_t seed,
                                 const McOptions& reference) {
  IdCheckReport rep;
  rep.user = user;
  const auto& layout = plan.layout;
  struct Acc {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    std::uint64_t n = 0;
    double shift = 0;
  };
  std::vector<BlockModel> models;
  std::vector<SubBlockRateStats> ref;
  std::vector<Acc> acc;
  for (int j = 0; j <= layout.position.at(user); ++j) {
    models.push_back(block_model(user, j, plan));
    ref.push_back(plan_block_stats(plan, user, j, reference));
    acc.push_back({});
    acc.back().shift = ref.back().mi;
  }
  std::vector<double> all, row;
  for (int f = 0; f < n_frames; ++f) {
    const auto payload = random_payloads(plan, derive_seed(seed, 2 * static_cast<std::uint64_t>(f)));
    ChannelOptions ch;
    ch.seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(f) + 1);
    const auto sim = simulate_frame(plan, payload, ch);
    const auto& y = sim.rx.y[user];
    std::size_t pos = 0;
    for (int j = 0; j <= layout.position[user]; ++j) {
      const auto& bm = models[j];
      const auto& blk = layout.blocks[j];
      if (bm.order == 0 || blk.length == 0) continue;
      const std::size_t A = bm.desired.size();
      const std::size_t B = bm.interference.size();
      all.resize(A * B);
      for (int t = 0; t < blk.length; ++t) {
        std::uint32_t label = 0;
        for (int b = 0; b < bm.order; ++b) label = (label << 1) | payload[user][pos++];
        const cdouble r = y[blk.start + t];
        for (std::size_t a = 0; a < A; ++a) {
          for (std::size_t b = 0; b < B; ++b) all[a * B + b] = -std::norm(r - bm.desired[a] - bm.interference[b]);
        }
        const double num = log_sum_exp(all);
        const double den = log_sum_exp(std::span<const double>(all).subspan(label * B, B));
        const double i = bm.order + (den - num) / std::numbers::ln2;
        auto& ac = acc[j];
        const double d = i - ac.shift;
        ac.s1 += d;
        ac.s2 += d * d;
        ac.s3 += d * d * d;
        ac.s4 += d * d * d * d;
        ++ac.n;
      }
    }
  }
  for (int j = 0; j <= layout.position[user]; ++j) {
    const auto& ac = acc[j];
    if (ac.n == 0) continue;
    IdBlockReport br;
    br.block = j;
    br.symbols = ac.n;
    const double n = static_cast<double>(ac.n);
    const double m1 = ac.s1 / n;
    const double m2 = ac.s2 / n;
    const double m3 = ac.s3 / n;
    const double m4 = ac.s4 / n;
    br.mean = ac.shift + m1;
    br.variance = std::max(0.0, m2 - m1 * m1);
    // Fourth central moment from raw moments about the shift.
    const double mu4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1;
    br.mi = ref[j].mi;
    br.dispersion = ref[j].dispersion;
    const double se_mean = std::sqrt(br.variance / n + ref[j].std_err_mi * ref[j].std_err_mi);
    const double se_var = std::sqrt(std::max(0.0, mu4 - br.variance * br.variance) / n +
                                    ref[j].std_err_dispersion * ref[j].std_err_dispersion);
    br.z_mean = se_mean > 0.0 ? (br.mean - br.mi) / se_mean : 0.0;
    br.z_variance = se_var > 0.0 ? (br.variance - br.dispersion) / se_var : 0.0;
    br.flagged = std::abs(br.z_mean) > 4.0 || std::abs(br.z_variance) > 4.0;
    rep.ok = rep.ok && !br.flagged;
    rep.blocks.push_back(br);
  }
  return rep;
}

Interleaver::Interleaver(std::size_t n, std::uint64_t seed) : perm_(n) {
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t r = splitmix64(derive_seed(seed, i));
    const auto j = static_cast<std::size_t>((static_cast<unsigned __int128>(r) * i) >> 64);
    std::swap(perm_[i - 1], perm_[j]);
  }
}

void Interleaver::check(std::size_t n) const {
  if (n != perm_.size()) throw std::invalid_argument("Interleaver: length mismatch");
}

namespace {

constexpr char kMagic[8] = {'T', 'I', 'N', 'B', 'C', 'D', 'M', 'P'};
constexpr std::uint32_t kDumpVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("read_dump: truncated input");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void put_complex(std::ostream& os, const std::vector<cdouble>& v) {
  put<std::uint64_t>(os, v.size());
  for (auto c : v) {
    put(os, c.real());
    put(os, c.imag());
  }
}

std::vector<cdouble> get_complex(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  std::vector<cdouble> v;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double re = get<double>(is);
    v.emplace_back(re, get<double>(is));
  }
  return v;
}

}  // namespace

void write_dump(std::ostream& os, std::span<const DumpRecord> records) {
  os.write(kMagic, sizeof(kMagic));
  put(os, kDumpVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    put(os, r.user);
    put<std::uint64_t>(os, r.bits.size());
    os.write(reinterpret_cast<const char*>(r.bits.data()), static_cast<std::streamsize>(r.bits.size()));
    put_complex(os, r.symbols);
    put_complex(os, r.y);
    put<std::uint64_t>(os, r.llr.size());
    for (double v : r.llr) put(os, v);
  }
}

std::vector<DumpRecord> read_dump(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("read_dump: bad magic");
  if (get<std::uint32_t>(is) != kDumpVersion) throw std::runtime_error("read_dump: unsupported version");
  const auto count = get<std::uint32_t>(is);
  std::vector<DumpRecord> out(count);
  for (auto& r : out) {
    r.user = get<std::uint32_t>(is);
    r.bits.resize(get<std::uint64_t>(is));
    if (!is.read(reinterpret_cast<char*>(r.bits.data()), static_cast<std::streamsize>(r.bits.size()))) {
      throw std::runtime_error("read_dump: truncated input");
    }
    r.symbols = get_complex(is);
    r.y = get_complex(is);
    const auto n = get<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < n; ++i) r.llr.push_back(get<double>(is));
  }
  return out;
}

}  // namespace tinbc
