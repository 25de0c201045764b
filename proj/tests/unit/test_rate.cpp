#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "tinbc/qfunc.hpp"
#include "tinbc/rate.hpp"
#include "tinbc/scheme.hpp"

using namespace tinbc;

namespace {

cdouble gain_db(double snr_db) { return {std::sqrt(std::pow(10.0, snr_db / 10.0)), 0.0}; }

LabeledConstellation unit_qam(int m) { return scale(build_gray_qam(m), normalization_factor(m)); }

struct Oracle {
  LabeledConstellation c;
  double snr_db;
  double mi;
  double dispersion;
};

// Independent one-dimensional quadrature references (per-axis factorization,
// adaptive integration in double precision).
std::vector<Oracle> oracles() {
  return {
      {unit_qam(2), 0.0, 0.971888308266, 1.319361668610},
      {unit_qam(2), 6.0, 1.823760909174, 0.448528702557},
      {unit_qam(4), 6.0, 2.203633549826, 1.873679647625},
      {unit_qam(4), 10.0, 3.163943188051, 1.493847173524},
      {unit_qam(6), 12.0, 3.824568154033, 2.032731785803},
      {scale(build_gray_qam(1), 2.0), 0.0, 0.721451590790, 0.533271940479},
      {scale(build_gray_qam(1), 2.0), 10.0, 0.999983328240, 0.000058392562},
  };
}

SystemSpec design_system() {
  SystemSpec s;
  s.power = 1.0;
  s.users = {{128, 1e-6, gain_db(18.0)}, {256, 1e-4, gain_db(5.0)}};
  return s;
}

}  // namespace

TEST_CASE("Gauss-Hermite rule") {
  for (int n : {1, 2, 3, 5, 20, 96, 200, 257, 512}) {
    const auto r = gauss_hermite(n);
    REQUIRE(r.nodes.size() == static_cast<std::size_t>(n));
    CHECK(std::is_sorted(r.nodes.begin(), r.nodes.end()));
    double w = 0.0, x2 = 0.0, x4 = 0.0;
    for (int i = 0; i < n; ++i) {
      w += r.weights[i];
      x2 += r.weights[i] * r.nodes[i] * r.nodes[i];
      x4 += r.weights[i] * std::pow(r.nodes[i], 4);
    }
    const double sp = std::sqrt(std::numbers::pi);
    CHECK(w == doctest::Approx(sp).epsilon(1e-12));
    if (n >= 2) CHECK(x2 == doctest::Approx(sp / 2.0).epsilon(1e-12));
    if (n >= 3) CHECK(x4 == doctest::Approx(3.0 * sp / 4.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gauss_hermite(0), std::invalid_argument);
  CHECK_THROWS_AS(gauss_hermite(513), std::invalid_argument);
}

TEST_CASE("quadrature is stable in the node count") {
  const auto c = unit_qam(4);
  CHECK(std::abs(quadrature_mi(c, gain_db(10.0), 64) - quadrature_mi(c, gain_db(10.0), 256)) < 1e-6);
}

TEST_CASE("quadrature matches reference mutual information") {
  for (const auto& o : oracles()) {
    CAPTURE(o.snr_db);
    CAPTURE(o.c.size());
    CHECK(std::abs(quadrature_mi(o.c, gain_db(o.snr_db)) - o.mi) < 1e-6);
  }
  CHECK_THROWS_AS(quadrature_mi(unit_qam(2), 1.0, 32), std::invalid_argument);
  CHECK_THROWS_AS(quadrature_mi(unit_qam(10), 1.0), std::invalid_argument);
}

TEST_CASE("Monte Carlo estimate within three standard errors of the references") {
  std::uint64_t seed = 7;
  for (const auto& o : oracles()) {
    CAPTURE(o.snr_db);
    CAPTURE(o.c.size());
    McOptions mc;
    mc.samples = 50000;
    mc.seed = seed++;
    const auto st = estimate_mi_dispersion(o.c, {}, gain_db(o.snr_db), mc);
    CHECK(st.sample_count == 50000);
    CHECK(std::abs(st.mi - o.mi) <= 3.0 * st.std_err_mi + 1e-12);
    // Near saturation the density is too skewed for a normal interval on V.
    if (o.dispersion > 1e-3) {
      CHECK(std::abs(st.dispersion - o.dispersion) <= 3.0 * st.std_err_dispersion);
    } else {
      CHECK(std::abs(st.dispersion - o.dispersion) < 1e-4);
    }
    CHECK(st.dispersion >= 0.0);
  }
}

TEST_CASE("high SNR saturates at the constellation size") {
  McOptions mc;
  mc.samples = 20000;
  const auto st = estimate_mi_dispersion(unit_qam(2), {}, gain_db(30.0), mc);
  CHECK(st.mi >= 1.999);
  CHECK(st.mi <= 2.0 + 1e-9);
  CHECK(st.dispersion < 1e-3);
}

TEST_CASE("zero channel gives zero information and dispersion") {
  McOptions mc;
  const auto st = estimate_mi_dispersion(unit_qam(4), {}, 0.0, mc);
  CHECK(st.mi == 0.0);
  CHECK(st.dispersion == 0.0);
}

TEST_CASE("dispersion shrinks with the channel gain") {
  McOptions mc;
  mc.samples = 20000;
  double prev = INFINITY;
  for (double g : {0.5, 0.1, 0.01}) {
    const auto st = estimate_mi_dispersion(unit_qam(4), {}, g, mc);
    CHECK(st.dispersion < prev);
    prev = st.dispersion;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("interfered rate follows the chain rule") {
  // I(X1; Y) = I(X1, X2; Y) - I(X2; Y | X1) with both terms interference-free.
  const auto spec = design_system();
  const auto plan = assign_power({{2}, {4, 4}}, spec, build_layout(spec));
  const auto own = plan.effective_constellation(0, 0);
  const auto other = plan.interferers(0, 0);
  REQUIRE(other.size() == 1);
  const std::vector<LabeledConstellation> parts{plan.unit_constellation(0, 0), plan.unit_constellation(1, 0)};
  const auto joint = scale(superimpose(parts), plan.blocks[0].eta);
  const cdouble h = spec.users[0].h;
  const double reference = quadrature_mi(joint, h) - quadrature_mi(other[0], h);

  McOptions mc;
  mc.samples = 100000;
  mc.seed = 11;
  const auto st = estimate_mi_dispersion(own, other, h, mc);
  CHECK(std::abs(st.mi - reference) <= 3.0 * st.std_err_mi);

  // The weak user's view of the same block.
  const cdouble h2 = spec.users[1].h;
  const auto own2 = plan.effective_constellation(1, 0);
  const auto st2 = estimate_mi_dispersion(own2, plan.interferers(1, 0), h2, mc);
  const double ref2 = quadrature_mi(joint, h2) - quadrature_mi(plan.effective_constellation(0, 0), h2);
  CHECK(std::abs(st2.mi - ref2) <= 3.0 * st2.std_err_mi);
}

TEST_CASE("generic and separable paths agree") {
  const auto spec = design_system();
  const auto plan = assign_power({{2}, {4, 4}}, spec, build_layout(spec));
  McOptions mc;
  mc.samples = 5000;
  mc.seed = 3;
  for (int k = 0; k < 2; ++k) {
    mc.path = McOptions::Path::Generic;
    const auto g = estimate_mi_dispersion(plan.effective_constellation(k, 0), plan.interferers(k, 0),
                                          spec.users[k].h, mc);
    mc.path = McOptions::Path::Separable;
    const auto s = estimate_mi_dispersion(plan.effective_constellation(k, 0), plan.interferers(k, 0),
                                          spec.users[k].h, mc);
    CHECK(g.mi == doctest::Approx(s.mi).epsilon(1e-10));
    CHECK(g.dispersion == doctest::Approx(s.dispersion).epsilon(1e-9));
  }
}

TEST_CASE("separable path refuses non-grid inputs") {
  const LabeledConstellation psk({{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}}, 2);
  McOptions mc;
  mc.samples = 2000;
  mc.path = McOptions::Path::Separable;
  CHECK_THROWS_AS(estimate_mi_dispersion(psk, {}, 1.0, mc), std::invalid_argument);
  mc.path = McOptions::Path::Auto;
  const auto st = estimate_mi_dispersion(psk, {}, 1.0, mc);
  CHECK(st.mi > 0.0);
  CHECK(st.mi < 2.0);
}

TEST_CASE("channel phase only changes the noise realization") {
  McOptions mc;
  mc.samples = 20000;
  const auto a = estimate_mi_dispersion(unit_qam(2), {}, 2.0, mc);
  mc.seed = 2;
  const auto b = estimate_mi_dispersion(unit_qam(2), {}, std::polar(2.0, 0.4), mc);
  CHECK(std::abs(a.mi - b.mi) <= 4.0 * std::hypot(a.std_err_mi, b.std_err_mi));
  CHECK(std::abs(quadrature_mi(unit_qam(2), 2.0) - quadrature_mi(unit_qam(2), std::polar(2.0, 0.4))) < 1e-7);
}

TEST_CASE("results do not depend on the worker count and are reproducible") {
  McOptions mc;
  mc.samples = 9000;
  mc.seed = 5;
  mc.workers = 1;
  const auto one = estimate_mi_dispersion(unit_qam(4), {}, gain_db(6.0), mc);
  mc.workers = 4;
  const auto four = estimate_mi_dispersion(unit_qam(4), {}, gain_db(6.0), mc);
  CHECK(one.mi == four.mi);
  CHECK(one.dispersion == four.dispersion);
  mc.seed = 6;
  const auto other = estimate_mi_dispersion(unit_qam(4), {}, gain_db(6.0), mc);
  CHECK(other.mi != one.mi);
}

TEST_CASE("estimator input checks") {
  McOptions mc;
  mc.samples = 999;
  CHECK_THROWS_AS(estimate_mi_dispersion(unit_qam(2), {}, 1.0, mc), std::invalid_argument);
  mc.samples = 1000;
  const std::vector<LabeledConstellation> big{build_gray_qam(8)};
  CHECK_THROWS_AS(estimate_mi_dispersion(build_gray_qam(6), big, 1.0, mc), std::invalid_argument);
}

TEST_CASE("third absolute moment on request") {
  McOptions mc;
  mc.samples = 5000;
  const auto plain = estimate_mi_dispersion(unit_qam(2), {}, 1.0, mc);
  CHECK(std::isnan(plain.third_abs_moment));
  mc.third_moment = true;
  const auto st = estimate_mi_dispersion(unit_qam(2), {}, 1.0, mc);
  CHECK(st.third_abs_moment > 0.0);
  // Lyapunov: E|X|^3 >= (E X^2)^{3/2}.
  CHECK(st.third_abs_moment >= std::pow(st.dispersion, 1.5) * (1.0 - 1e-9));
  CHECK(st.mi == plain.mi);
}

TEST_CASE("second-order rate formula") {
  const std::vector<BlockTerm> one{{200, 2.0, 0.5}};
  const auto r = second_order_rate(one, 1e-6, 200);
  CHECK(r.rate == doctest::Approx(2.0 - std::sqrt(0.5 / 200.0) * 4.753424308822899).epsilon(1e-12));
  CHECK(r.first_order == doctest::Approx(2.0));
  CHECK_FALSE(r.non_positive);
  CHECK(single_block_rate(2.0, 0.5, 200, 1e-6) == doctest::Approx(r.rate).epsilon(1e-14));

  const std::vector<BlockTerm> two{{128, 1.5, 0.8}, {128, 3.0, 1.2}};
  const auto t = second_order_rate(two, 1e-4, 256);
  const double expect = (128 * 1.5 + 128 * 3.0 - std::sqrt(128 * 0.8 + 128 * 1.2) * 3.719016485455681) / 256.0;
  CHECK(t.rate == doctest::Approx(expect).epsilon(1e-12));
  CHECK(two_block_rate(1.5, 0.8, 3.0, 1.2, 128, 256, 1e-4) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(two_block_rate(1.5, 0.8, 9.0, 9.0, 256, 256, 1e-4) ==
        doctest::Approx(single_block_rate(1.5, 0.8, 256, 1e-4)).epsilon(1e-14));
}

TEST_CASE("second-order rate edge cases") {
  const std::vector<BlockTerm> b{{100, 1.0, 3.0}};
  CHECK(second_order_rate(b, 0.5, 100).rate == doctest::Approx(1.0));
  const std::vector<BlockTerm> flat{{100, 1.25, 0.0}};
  CHECK(second_order_rate(flat, 1e-9, 100).rate == doctest::Approx(1.25));
  const std::vector<BlockTerm> weak{{10, 0.01, 2.0}};
  CHECK(second_order_rate(weak, 1e-6, 10).non_positive);
  CHECK_THROWS_AS(second_order_rate(b, 0.0, 100), std::invalid_argument);
  CHECK_THROWS_AS(second_order_rate(b, 0.6, 100), std::invalid_argument);
  CHECK_THROWS_AS(second_order_rate(b, 0.1, 0), std::invalid_argument);
  const std::vector<BlockTerm> nan{{100, NAN, 1.0}};
  CHECK_THROWS_AS(second_order_rate(nan, 0.1, 100), std::invalid_argument);
}

TEST_CASE("plan evaluation combines sub-block stats") {
  const auto spec = design_system();
  const auto plan = assign_power({{2}, {4, 4}}, spec, build_layout(spec));
  McOptions mc;
  mc.samples = 20000;
  mc.third_moment = true;
  const auto res = evaluate_plan(plan, mc);
  REQUIRE(res.users.size() == 2);
  const auto& u2 = res.users[1];
  REQUIRE(u2.terms.size() == 2);
  CHECK(u2.terms[0].length == 128);
  CHECK(u2.terms[1].length == 128);
  CHECK(u2.rate == doctest::Approx(second_order_rate(u2.terms, 1e-4, 256).rate).epsilon(1e-14));
  const auto direct = plan_block_stats(plan, 1, 1, mc);
  CHECK(direct.mi == u2.stats[1].mi);
  CHECK(res.users[0].rate > 0.9);
  CHECK(res.users[0].rate < 1.2);
  CHECK(u2.rate > 1.45);
  CHECK(u2.rate < 1.7);
  CHECK(std::isfinite(u2.berry_esseen));
  CHECK(u2.berry_esseen > 0.0);
}

TEST_CASE("silent sub-blocks contribute nothing") {
  const auto spec = design_system();
  const auto plan = assign_power({{2}, {0, 4}}, spec, build_layout(spec));
  McOptions mc;
  mc.samples = 5000;
  const auto st = plan_block_stats(plan, 1, 0, mc);
  CHECK(st.mi == 0.0);
  CHECK(st.dispersion == 0.0);
  const auto res = evaluate_plan(plan, mc);
  CHECK(res.users[1].first_order == doctest::Approx(res.users[1].stats[1].mi / 2.0));
}

TEST_CASE("quadrature limits") {
  CHECK(quadrature_mi(unit_qam(4), {0.0, 0.0}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(quadrature_mi(scale(build_gray_qam(1), 2.0), gain_db(20.0)) == doctest::Approx(1.0).epsilon(1e-9));
  for (int m = 1; m <= 6; ++m) {
    for (double snr : {-5.0, 5.0, 15.0}) {
      const double i = quadrature_mi(unit_qam(m), gain_db(snr));
      CHECK(i >= 0.0);
      CHECK(i <= m + 1e-12);
    }
  }
}

TEST_CASE("rate is non-decreasing in eps and blocklength") {
  const double I = 2.2, V = 1.9;
  double prev = -1e9;
  for (double eps : {1e-9, 1e-6, 1e-4, 1e-2, 0.1, 0.5}) {
    const double r = single_block_rate(I, V, 256, eps);
    CHECK(r >= prev);
    CHECK(r <= I + 1e-15);
    prev = r;
  }
  prev = -1e9;
  for (int n : {16, 64, 256, 1024, 4096}) {
    const std::vector<BlockTerm> b{{n / 2, 1.5, 0.8}, {n / 2, 3.0, 1.2}};
    const double r = second_order_rate(b, 1e-4, n).rate;
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("estimates stay finite for large amplitudes") {
  McOptions mc;
  mc.samples = 4000;
  for (double g : {10.0, 100.0, 1000.0}) {
    const auto st = estimate_mi_dispersion(unit_qam(4), {}, {g, 0.0}, mc);
    CHECK(std::isfinite(st.mi));
    CHECK(std::isfinite(st.dispersion));
    CHECK(st.mi <= 4.0 + 1e-12);
    if (g >= 100.0) CHECK(st.mi == doctest::Approx(4.0).epsilon(1e-9));
    const LabeledConstellation inter[] = {unit_qam(2)};
    mc.path = McOptions::Path::Generic;
    const auto gen = estimate_mi_dispersion(scale(build_gray_qam(2), g), inter, {1.0, 0.0}, mc);
    CHECK(std::isfinite(gen.mi));
    CHECK(std::isfinite(gen.dispersion));
    mc.path = McOptions::Path::Auto;
  }
}

TEST_CASE("4-QAM at 6 dB agrees with the reference at 1e5 samples") {
  McOptions mc;
  mc.samples = 100000;
  mc.seed = 31;
  const auto st = estimate_mi_dispersion(unit_qam(2), {}, gain_db(6.0), mc);
  CHECK(std::abs(st.mi - 1.823760909174) <= 3.0 * st.std_err_mi);
  CHECK(std::abs(st.dispersion - 0.448528702557) <= 3.0 * st.std_err_dispersion);
}
