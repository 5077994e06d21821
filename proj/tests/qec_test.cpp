#include <catch2/catch_amalgamated.hpp>

#include "chiralxfer/qec.hpp"

using namespace chiralxfer;

TEST_CASE("binomial logical bases: orthogonality and mean photon number") {
  CodeSpec parity{CodeKind::binomial_parity};
  Vec pp = logical_state(parity, +1);
  Vec pm = logical_state(parity, -1);
  Mat n = number_matrix(parity.dim());
  CHECK(std::abs(pp.dot(pm)) < 1e-12);
  CHECK(std::real(pp.dot(n * pp)) == Catch::Approx(2.0).margin(1e-12));
  CHECK(std::real(pm.dot(n * pm)) == Catch::Approx(2.0).margin(1e-12));
  // Knill-Laflamme off-diagonal condition for a single loss
  CHECK(std::abs(pp.dot(n * pm)) < 1e-12);

  CodeSpec mod3{CodeKind::binomial_mod3};
  Vec qp = logical_state(mod3, +1);
  Vec qm = logical_state(mod3, -1);
  Mat n3 = number_matrix(mod3.dim());
  CHECK(std::abs(qp.dot(qm)) < 1e-12);
  CHECK(std::real(qp.dot(n3 * qp)) == Catch::Approx(3.0).margin(1e-12));
  CHECK(std::abs(qp.dot(n3 * qm)) < 1e-12);
}

TEST_CASE("encoding amplitudes and the cat pair overlap") {
  CodeSpec parity{CodeKind::binomial_parity};
  StateVector enc = encode(1.0, 0.0, parity);
  CHECK(std::abs(enc.amplitudes(0) - 0.5) < 1e-14);
  CHECK(std::abs(enc.amplitudes(2) - std::sqrt(2.0) / 2.0) < 1e-14);
  CHECK(std::abs(enc.amplitudes(4) - 0.5) < 1e-14);
  CHECK(std::abs(enc.amplitudes(1)) + std::abs(enc.amplitudes(3)) < 1e-14);

  CodeSpec cat{CodeKind::cat, std::sqrt(2.0)};
  Vec cp = logical_state(cat, +1);
  Vec cm = logical_state(cat, -1);
  CHECK(std::abs(cp.dot(cm)) > 1e-3);  // non-orthogonal pair
  CHECK(cp.norm() == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(encode(1.0, 1.0, parity), std::invalid_argument);
  CodeSpec tight{CodeKind::binomial_mod3};
  tight.fock_cutoff = 5;
  CHECK_THROWS_AS(logical_state(tight, +1), std::invalid_argument);
}

TEST_CASE("loss channel: Kraus ladder basics") {
  CodeSpec parity{CodeKind::binomial_parity};
  DensityMatrix rho = pure_density(encode(1.0, 0.0, parity));

  DensityMatrix same = loss_channel_kraus(rho, 0.0);
  CHECK((same.matrix - rho.matrix).cwiseAbs().maxCoeff() < 1e-15);

  // single photon: |1><1| -> (1-P)|1><1| + P|0><0|
  Mat one = Mat::Zero(4, 4);
  one(1, 1) = 1.0;
  DensityMatrix r1{SpaceLayout::single("mode", 4), one};
  DensityMatrix out = loss_channel_kraus(r1, 0.3);
  CHECK(out.matrix(1, 1).real() == Catch::Approx(0.7).margin(1e-14));
  CHECK(out.matrix(0, 0).real() == Catch::Approx(0.3).margin(1e-14));

  // trace preservation on a thermal input
  DensityMatrix th = thermal_state(0.7, 12);
  DensityMatrix tho = loss_channel_kraus(th, 0.25);
  CHECK(tho.matrix.trace().real() == Catch::Approx(1.0).margin(1e-12));

  // odd-sector weight after loss on the parity |+>: exactly the one- and
  // three-loss binomial weights of the {0,2,4} populations
  double P = 0.15;
  DensityMatrix lost = loss_channel_kraus(rho, P);
  double odd = 0.0;
  for (int n = 1; n < parity.dim(); n += 2) odd += lost.matrix(n, n).real();
  double expect = P * (1 - P) + P * std::pow(1 - P, 3) + std::pow(P, 3) * (1 - P);
  CHECK(odd == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("loss channel: Kraus ladder agrees with the beamsplitter dilation") {
  CodeSpec mod3{CodeKind::binomial_mod3};
  StateVector psi = encode(std::sqrt(0.3), std::sqrt(0.7), mod3);
  DensityMatrix rho = pure_density(psi);
  for (double P : {0.05, 0.2, 0.5}) {
    DensityMatrix a = loss_channel_kraus(rho, P);
    DensityMatrix b = loss_channel_dilation(rho, P);
    CHECK((a.matrix - b.matrix).cwiseAbs().maxCoeff() < 1e-8);
  }
  // thermal environment keeps the trace and adds gain weight above the code
  DensityMatrix g = loss_channel_dilation(rho, 0.05, 1.0);
  CHECK(g.matrix.trace().real() == Catch::Approx(1.0).margin(1e-9));
  CHECK(g.matrix(7, 7).real() > 0.0);  // one photon added onto |6>
}

TEST_CASE("syndrome measurement picks the photon-number class") {
  CodeSpec parity{CodeKind::binomial_parity};
  DensityMatrix plus = pure_density(encode(1.0, 0.0, parity));
  auto res = syndrome_measure(plus, parity);
  REQUIRE(res.size() == 2);
  CHECK(res[0].p == 0);
  CHECK(res[0].probability == Catch::Approx(1.0).margin(1e-12));
  CHECK(res[1].probability == Catch::Approx(0.0).margin(1e-12));

  Mat a = annihilation_matrix(parity.dim());
  Vec dropped = a * logical_state(parity, +1);
  dropped /= dropped.norm();
  DensityMatrix rho_d{plus.layout, dropped * dropped.adjoint()};
  auto res_d = syndrome_measure(rho_d, parity);
  CHECK(res_d[1].p == -1);
  CHECK(res_d[1].probability == Catch::Approx(1.0).margin(1e-12));
  res_d[1].post_state.validate();

  CodeSpec mod3{CodeKind::binomial_mod3};
  Vec gained = annihilation_matrix(mod3.dim()).adjoint() *
               logical_state(mod3, +1);
  gained /= gained.norm();
  DensityMatrix rho_g{SpaceLayout::single("mode", mod3.dim()),
                      gained * gained.adjoint()};
  auto res_g = syndrome_measure(rho_g, mod3);
  REQUIRE(res_g.size() == 3);
  CHECK(res_g[2].p == +1);
  CHECK(res_g[2].probability == Catch::Approx(1.0).margin(1e-12));

  // mixed state: probabilities sum to one
  DensityMatrix th = thermal_state(0.9, mod3.dim());
  double tot = 0.0;
  for (const auto& o : syndrome_measure(th, mod3)) tot += o.probability;
  CHECK(tot == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("recovery targets carry the deterministic decay factors") {
  CodeSpec parity{CodeKind::binomial_parity};
  auto [tp, tm] = recovery_targets(parity, 0.0, 0);
  CHECK((tp - logical_state(parity, +1)).norm() < 1e-14);
  CHECK((tm - logical_state(parity, -1)).norm() < 1e-14);

  auto [lp, lm] = recovery_targets(parity, 0.0, -1);
  Vec ref = Vec::Zero(parity.dim());
  ref(1) = ref(3) = 1.0 / std::sqrt(2.0);
  CHECK((lp - ref).norm() < 1e-13);
  ref(1) = -1.0 / std::sqrt(2.0);
  CHECK((lm - ref).norm() < 1e-13);

  double th = 0.3;
  double c = std::cos(th);
  auto [dp, dm] = recovery_targets(parity, th, 0);
  Vec want = Vec::Zero(parity.dim());
  want(0) = 1.0;
  want(2) = std::sqrt(2.0) * c * c;
  want(4) = std::pow(c, 4);
  want /= want.norm();
  CHECK((dp - want).norm() < 1e-13);
  CHECK(std::abs(dp.dot(dm)) > 1e-4);  // damped targets are not orthogonal

  // mod-3 targets pick up the arrival sign flip on |3>
  CodeSpec mod3{CodeKind::binomial_mod3};
  auto [mp, mm] = recovery_targets(mod3, th, 0);
  Vec w3 = Vec::Zero(mod3.dim());
  w3(0) = 1.0;
  w3(3) = -std::sqrt(2.0) * std::pow(c, 3);
  w3(6) = std::pow(c, 6);
  w3 /= w3.norm();
  CHECK((mp - w3).norm() < 1e-13);

  CHECK_THROWS_AS(recovery_targets(parity, 0.0, +1), std::invalid_argument);
}

TEST_CASE("decoding is lossless at P = 0 and consistent with no code") {
  for (CodeKind kind : {CodeKind::none, CodeKind::binomial_parity,
                        CodeKind::binomial_mod3}) {
    CodeSpec code{kind, std::sqrt(2.0)};
    CHECK(coded_loss_fidelity(code, 0.0) == Catch::Approx(1.0).margin(1e-6));
  }

  // the cat pair is not orthogonal, so even a lossless run pays a fixed
  // penalty; the symmetric decode reaches (1 + sqrt(1 - s^2)) / 2 exactly
  CodeSpec cat{CodeKind::cat, std::sqrt(2.0)};
  double s = std::real(logical_state(cat, +1).dot(logical_state(cat, -1)));
  double best = 0.5 * (1.0 + std::sqrt(1.0 - s * s));
  double f_sym = coded_loss_fidelity(cat, 0.0, 0.0, RecoveryStyle::symmetric);
  CHECK(f_sym == Catch::Approx(best).margin(1e-10));
  double f_anc = coded_loss_fidelity(cat, 0.0);
  CHECK(f_anc > 0.99);
  CHECK(f_anc <= best + 1e-12);

  // no-code channel score matches the amplitude-damping closed form
  CodeSpec none{CodeKind::none};
  for (double P : {0.1, 0.29, 0.4}) {
    double expect = std::pow(1.0 + std::sqrt(1.0 - P), 2) / 4.0;
    CHECK(coded_loss_fidelity(none, P) == Catch::Approx(expect).margin(1e-10));
  }
}

TEST_CASE("decode_and_score with no code equals the plain transfer fidelity") {
  NetworkSpec net;
  net.nodes = {NodeSpec{NodeKind::cavity, 4}, NodeSpec{NodeKind::cavity, 4}};
  net.pulses.family = PulseFamily::exp_pair;
  net.pulses.kappa_max = 1.0;
  net.pulses.t_i = -10.0;
  net.pulses.t_f = 10.0;
  net.theta = 0.2;

  Vec init = Vec::Zero(8);
  init(0) = init(3) = 1.0 / std::sqrt(2.0);
  DensityMatrix red = transfer_reduced(net, init);
  double f_plain = state_fidelity(red, bell_target(4));

  CodeSpec none{CodeKind::none};
  // theta = 0 recovery: no damping compensation, pure basis mapping
  double f_dec = decode_and_score(red, none, 0.0);
  CHECK(f_dec == Catch::Approx(f_plain).margin(1e-12));
}

TEST_CASE("parity code corrects single losses below the crossover") {
  CodeSpec parity{CodeKind::binomial_parity};
  CodeSpec none{CodeKind::none};
  double fc10 = coded_loss_fidelity(parity, 0.1);
  double fu10 = coded_loss_fidelity(none, 0.1);
  CHECK(fc10 > fu10);
  CHECK(fc10 > 0.97);
  double fc35 = coded_loss_fidelity(parity, 0.35);
  double fu35 = coded_loss_fidelity(none, 0.35);
  CHECK(fc35 < fu35);  // past the crossover the bare qubit wins
}

TEST_CASE("mod-3 code corrects thermal-environment errors at small P") {
  CodeSpec mod3{CodeKind::binomial_mod3};
  CodeSpec none{CodeKind::none};
  // stimulated loss/gain on the high-photon code components grows fast with
  // P, so the advantage over the bare encoding peaks at small P and is gone
  // by P ~ 0.05 (see the acceptance analysis)
  double fc = coded_loss_fidelity(mod3, 0.01, 1.0);
  double fu = coded_loss_fidelity(none, 0.01, 1.0);
  CHECK(fc > fu);
  CHECK(fc > 0.99);
  // single photon gain alone is fully identified and corrected
  Vec gained = annihilation_matrix(mod3.dim()).adjoint() *
               (number_flip(mod3.dim()) * logical_state(mod3, +1));
  gained /= gained.norm();
  SpaceLayout lay({{"mode", mod3.dim()}, {"anc", 2}});
  Vec amp = Vec::Zero(2 * mod3.dim());
  for (int n = 0; n < mod3.dim(); ++n) amp(2 * n) = gained(n);
  // build |gained>|0>_a + flip|-> |1>_a and check the +1 branch decodes
  Vec minus = number_flip(mod3.dim()) * logical_state(mod3, -1);
  Vec gained_m = annihilation_matrix(mod3.dim()).adjoint() * minus;
  gained_m /= gained_m.norm();
  for (int n = 0; n < mod3.dim(); ++n) amp(2 * n + 1) = gained_m(n);
  StateVector psi{lay, amp};
  psi.normalize();
  double f1 = decode_and_score(pure_density(psi), mod3, 0.0);
  CHECK(f1 == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("encoded transfer through the cascaded link matches the channel model") {
  CodeSpec parity{CodeKind::binomial_parity};
  NetworkSpec net;
  net.nodes = {NodeSpec{NodeKind::cavity, 6}, NodeSpec{NodeKind::cavity, 6}};
  net.pulses.family = PulseFamily::exp_pair;
  net.pulses.kappa_max = 1.0;
  net.pulses.t_i = -10.0;
  net.pulses.t_f = 10.0;
  net.theta = std::asin(std::sqrt(0.1));

  double f_me = coded_transfer_fidelity(net, parity);
  double f_ch = coded_loss_fidelity(parity, 0.1);
  CHECK(std::abs(f_me - f_ch) < 2e-3);
}
