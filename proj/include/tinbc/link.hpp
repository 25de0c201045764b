#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tinbc/rate.hpp"
#include "tinbc/scheme.hpp"

namespace tinbc {

struct ReceivedFrame {
  std::vector<std::vector<cdouble>> y;  // y_k, length N_k
  std::vector<cdouble> h;               // realized channels
  std::uint64_t seed = 0;
};

struct ChannelOptions {
  std::uint64_t seed = 1;
  double noise_std = 1.0;  // 0 gives the noiseless channel y_k = h_k x
};

struct SimulatedFrame {
  Frame tx;
  ReceivedFrame rx;
};

/// Maps every user's payload, builds the superimposed frame and passes it
/// through y_k[j] = h_k x[j] + z_k[j], z_k ~ CN(0, noise_std^2).
SimulatedFrame simulate_frame(const SchemePlan& plan, const std::vector<std::vector<std::uint8_t>>& payload,
                              const ChannelOptions& opts);

enum class LlrMode { Exact, MaxLog };

/// Bit LLRs log P(b=0|y)/P(b=1|y) of user k's symbols in sub-block j, with the
/// other participants' symbols of that sub-block marginalized as part of the
/// channel law. `y` must hold exactly the symbols of the sub-block.
std::vector<double> tin_llr(std::span<const cdouble> y, int user, int block, const SchemePlan& plan,
                            LlrMode mode = LlrMode::Exact, double noise_var = 1.0);

/// Log posterior of each label of user k's constellation for one received
/// symbol (normalized so the probabilities sum to one).
std::vector<double> symbol_log_posteriors(cdouble y, int user, int block, const SchemePlan& plan,
                                          double noise_var = 1.0);

/// LLRs of a whole received user frame, sub-block by sub-block (length n_k).
std::vector<double> frame_llr(std::span<const cdouble> y, int user, const SchemePlan& plan,
                              LlrMode mode = LlrMode::Exact, double noise_var = 1.0);

/// Bit decisions: 0 when LLR >= 0.
std::vector<std::uint8_t> hard_decisions(std::span<const double> llr);

struct BerResult {
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
  double ber() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
};

/// Uncoded BER of user k from hard decisions on TIN LLRs, random payloads
/// for all users, noise scaled by 10^(-snr_offset_db/20).
BerResult uncoded_ber(const SchemePlan& plan, int user, double snr_offset_db, std::uint64_t min_bits,
                      std::uint64_t seed, LlrMode mode = LlrMode::Exact);

struct IdBlockReport {
  int block = 0;
  std::uint64_t symbols = 0;
  double mean = 0.0;
  double variance = 0.0;
  double mi = 0.0;          // rate_engine reference
  double dispersion = 0.0;  // rate_engine reference
  double z_mean = 0.0;      // standardized deviations
  double z_variance = 0.0;
  bool flagged = false;     // |z| > 4
};

struct IdCheckReport {
  int user = 0;
  std::vector<IdBlockReport> blocks;
  bool ok = true;
};

/// Per-symbol information densities from simulated frames compared with the
/// rate engine's (I, V) for each sub-block of user k.
IdCheckReport empirical_id_check(const SchemePlan& plan, int user, int n_frames, std::uint64_t seed,
                                 const McOptions& reference);

/// Seedable uniform random permutation.
class Interleaver {
public:
  Interleaver(std::size_t n, std::uint64_t seed);

  std::size_t size() const noexcept { return perm_.size(); }
  const std::vector<std::size_t>& permutation() const noexcept { return perm_; }

  /// out[i] = in[perm[i]]
  template <class T>
  std::vector<T> apply(std::span<const T> in) const {
    check(in.size());
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) out[i] = in[perm_[i]];
    return out;
  }

  template <class T>
  std::vector<T> invert(std::span<const T> in) const {
    check(in.size());
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) out[perm_[i]] = in[i];
    return out;
  }

private:
  void check(std::size_t n) const;
  std::vector<std::size_t> perm_;
};

/// One user's record in a frame dump.
struct DumpRecord {
  std::uint32_t user = 0;
  std::vector<std::uint8_t> bits;
  std::vector<cdouble> symbols;
  std::vector<cdouble> y;
  std::vector<double> llr;
};

/// Writes one frame: magic "TINBCDMP", u32 version, u32 record count, then
/// per record u32 user, u64 bit count + bytes, u64 symbol count + (re, im)
/// pairs for symbols and y, u64 LLR count + values. All integers and float64
/// values little-endian.
void write_dump(std::ostream& os, std::span<const DumpRecord> records);
std::vector<DumpRecord> read_dump(std::istream& is);

}  // namespace tinbc
