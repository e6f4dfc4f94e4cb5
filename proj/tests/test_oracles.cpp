#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fairflip/oracles.hpp"

using namespace fairflip;

TEST_CASE("coin oracle basics") {
    auto sch = weight_schedule(5);

    // delta = 1/2 with odd total coin count gives unbiased coins.
    auto rng = SplitRng(3);
    auto res = coin_oracle(sch, 3, make_delta(Rat(1, 2)), {}, rng);
    CHECK(std::fabs(res.eps) < 1e-9);
    CHECK(res.coin >= -25);
    CHECK(res.coin <= 25);
    CHECK((res.coin + 25) % 2 == 0);

    // Final round: the conditional value is the sign indicator.
    std::vector<long> coins{9, -4, 3, 2};  // rounds 1..4 of m=5
    auto r2 = SplitRng(4);
    auto last = coin_oracle(sch, 3, make_delta(Rat(1, 2)), coins, r2);
    long total = 9 - 4 + 3 + 2 + last.coin;
    CHECK(last.delta_next.fixed64 == (total >= 0 ? ~0ULL : 0ULL));

    // Reconstructing the shares gives back (coin, delta).
    auto [c, d] = decode_coin_delta(reconstruct(last.shares));
    CHECK(c == last.coin);
    CHECK(d.fixed64 == last.delta_next.fixed64);

    // Too many rounds.
    std::vector<long> five{1, 1, 1, 1, 1};
    auto r3 = SplitRng(5);
    CHECK_THROWS_AS(coin_oracle(sch, 3, make_delta(0.5), five, r3), std::domain_error);
}

TEST_CASE("coin oracle: pinned-seed value recomputed from the drawn coin") {
    // m=3, delta=1/2, no prior coins: delta_1 must equal the tail of the
    // remaining 5 coins at -c_1.
    auto sch = weight_schedule(3);
    for (std::uint64_t seed : {7ULL, 8ULL, 9ULL, 10ULL}) {
        auto rng = SplitRng(seed);
        auto res = coin_oracle(sch, 3, make_delta(Rat(1, 2)), {}, rng);
        double expect = binom_tail(5L, res.eps, -res.coin);
        CHECK(res.delta_next.fixed64 == make_delta(expect).fixed64);
        // Determinism.
        auto rng2 = SplitRng(seed);
        auto res2 = coin_oracle(sch, 3, make_delta(Rat(1, 2)), {}, rng2);
        CHECK(res2.coin == res.coin);
        CHECK(res2.delta_next.fixed64 == res.delta_next.fixed64);
    }
}

TEST_CASE("defense tilde: singleton") {
    auto sch = weight_schedule(5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto res = defense_tilde(sch, 3, {2}, make_delta(Rat(1)), SplitRng(seed), 0, 0);
        REQUIRE(res.outputs.size() == 1);
        CHECK(res.outputs[0].bit == 1);  // delta = 1 forces the bit
        CHECK(res.outputs[0].kind == PayloadKind::SingletonBit);
    }
    CHECK_THROWS_AS(defense_tilde(sch, 3, {}, make_delta(0.5), SplitRng(1), 0, 0), std::domain_error);
}

TEST_CASE("defense tilde: noisy share for larger subsets") {
    auto sch = weight_schedule(5);

    // delta = 0 forces an all-minus bank, so no positive subset sums.
    auto res0 = defense_tilde(sch, 3, {0, 1, 2}, make_delta(Rat(0)), SplitRng(5), 0, 0);
    CHECK(res0.noisy_delta.fixed64 == 0);

    // Shares reconstruct the noisy value.
    EncodedValue acc = res0.outputs[0].noisy_share;
    for (std::size_t i = 1; i < 3; ++i) acc = xor_values(acc, res0.outputs[i].noisy_share);
    CHECK(decode_delta64(acc).fixed64 == res0.noisy_delta.fixed64);

    // Pinned seed: the noisy value is the hypergeometric tail of the logged
    // bank weight.
    auto res = defense_tilde(sch, 3, {0, 1, 2}, make_delta(Rat(1, 2)), SplitRng(6), 0, 0);
    long N = alpha_factor(5, 3, 3).bank_size;
    CHECK(N == 275);
    double expect = hyp_tail_f(N, res.addnoise_bank_weight, 55, 1);
    CHECK(res.noisy_delta.fixed64 == make_delta(std::clamp(expect, 0.0, 1.0)).fixed64);

    // Unbiasedness: E[delta'] = delta over many calls (ms1 odd).
    const long trials = 20000;
    double sum = 0.0;
    for (long i = 0; i < trials; ++i) {
        auto r = defense_tilde(sch, 3, {0, 1, 2}, make_delta(Rat(1, 2)), SplitRng(100).fork(i), 0, 0);
        sum += r.noisy_delta.value();
    }
    double mean = sum / trials;
    CHECK(std::fabs(mean - 0.5) < 3.0 * 0.5 / std::sqrt(static_cast<double>(trials)));
}

TEST_CASE("addnoise tie behavior") {
    // Bank weight 0 with odd sample size never ties: the strictly-positive
    // tail equals one half exactly.  (A weight-0 bank must be even-sized.)
    CHECK(hyp_tail(110, 0, 55, 1) == Rat(1, 2));
    CHECK(hyp_tail_f(110, 0, 55, 1) == Catch::Approx(0.5).margin(1e-12));
    CHECK(hyp_tail(274, 0, 55, 1) == Rat(1, 2));
    // All-plus bank forces delta' = 1.
    CHECK(hyp_tail(275, 275, 55, 1) == Rat(1));
}

TEST_CASE("defense oracle reconstructs then delegates") {
    auto sch = weight_schedule(5);
    auto delta = make_delta(Rat(1, 3));
    SplitRng srng(8);
    auto shares = share(encode_delta64(delta), 4, srng);
    std::vector<EncodedValue> parts;
    for (int i = 0; i < 4; ++i) parts.push_back(shares.share_as_value(static_cast<std::size_t>(i)));

    for (auto subset : std::vector<std::vector<int>>{{1}, {0, 2}, {0, 1, 3}}) {
        auto via_shares = defense_oracle(sch, 4, subset, parts, SplitRng(77), 0, 0);
        auto direct = defense_tilde(sch, 4, subset, delta, SplitRng(77), 0, 0);
        REQUIRE(via_shares.outputs.size() == direct.outputs.size());
        CHECK(via_shares.input_delta.fixed64 == delta.fixed64);
        for (std::size_t i = 0; i < direct.outputs.size(); ++i) {
            CHECK(via_shares.outputs[i].kind == direct.outputs[i].kind);
            CHECK(via_shares.outputs[i].bit == direct.outputs[i].bit);
            CHECK(via_shares.outputs[i].noisy_share == direct.outputs[i].noisy_share);
        }
    }
}

TEST_CASE("ht defense protocol bundle") {
    auto sch = weight_schedule(5);

    // delta = 1: everything is forced positive.
    auto b1 = ht_defense_protocol(sch, make_delta(Rat(1)), SplitRng(3), 0, 0);
    CHECK(b1->initial_dbit(0) == 1);
    CHECK(b1->initial_dbit(1) == 1);
    for (int i = 1; i <= 5; ++i) CHECK(b1->coin(i) == sch.coins_in_round(i));
    CHECK(b1->bank_weight(0) == 2 * 55);

    // Shares reconstruct the underlying coin and banks.
    auto b = ht_defense_protocol(sch, make_delta(Rat(1, 2)), SplitRng(9), 0, 0);
    for (int i = 1; i <= 5; ++i) {
        auto v = xor_values(b->coin_share(0, i), b->coin_share(1, i));
        CHECK(decode_signed(v) == b->coin(i));
    }
    for (int z = 0; z < 2; ++z) {
        auto v = xor_values(b->bank_share(0, z), b->bank_share(1, z));
        const auto& bank = b->bank(z);
        long w = 0;
        for (std::size_t i = 0; i < bank.size(); ++i) {
            int bit = (v.bytes[i / 8] >> (i % 8)) & 1;
            CHECK(bit == (bank[i] > 0 ? 1 : 0));
            w += bank[i];
        }
        CHECK(w == b->bank_weight(z));
    }

    // Fair case: the initial defense bit is unbiased (subset sums of odd size
    // never tie).
    const long trials = 20000;
    long ones = 0;
    for (long i = 0; i < trials; ++i) {
        auto bb = ht_defense_protocol(sch, make_delta(Rat(1, 2)), SplitRng(50).fork(i), 0, 0);
        ones += bb->initial_dbit(0);
    }
    double mean = static_cast<double>(ones) / trials;
    CHECK(std::fabs(mean - 0.5) < 3.0 * 0.5 / std::sqrt(static_cast<double>(trials)));
}

TEST_CASE("ht defense round") {
    auto sch = weight_schedule(3);
    auto b = ht_defense_protocol(sch, make_delta(Rat(1, 2)), SplitRng(21), 0, 0);

    // Last round: the sample is empty, so the bit is the sign of the coin sum.
    long prior = b->coin(1) + b->coin(2);
    auto rr = SplitRng(4);
    auto res = ht_defense_round(sch, *b, prior, 3, rr);
    int expect = sign_bit(prior + b->coin(3));
    CHECK(res.dbit[0] == expect);
    CHECK(res.dbit[1] == expect);

    // All-plus banks dominate any prefix above -ms[i+1].
    auto bp = ht_defense_protocol(sch, make_delta(Rat(1)), SplitRng(22), 0, 0);
    auto r5 = SplitRng(5);
    auto resp = ht_defense_round(sch, *bp, -3, 1, r5);
    CHECK(resp.dbit[0] == 1);
    CHECK(resp.dbit[1] == 1);

    // Replay with the same randomness reproduces the drawn subset sums.
    auto ra = SplitRng(91);
    auto rb = SplitRng(91);
    auto ra_res = ht_defense_round(sch, *b, 0, 1, ra);
    auto rb_res = ht_defense_round(sch, *b, 0, 1, rb);
    CHECK(ra_res.subset_sum[0] == rb_res.subset_sum[0]);
    CHECK(ra_res.dbit[0] == rb_res.dbit[0]);

    auto r6 = SplitRng(6);
    CHECK_THROWS_AS(ht_defense_round(sch, *b, 0, 4, r6), std::domain_error);
}

TEST_CASE("add_noise parameter checks") {
    auto sch = weight_schedule(5);
    auto rng = SplitRng(1);
    CHECK_THROWS_AS(add_noise(sch, 3, 2, make_delta(0.5), rng), std::domain_error);
    CHECK_THROWS_AS(add_noise(sch, 3, 4, make_delta(0.5), rng), std::domain_error);
    auto res = add_noise(sch, 4, 3, make_delta(0.5), rng);
    CHECK(res.bank_size == alpha_factor(5, 4, 3).bank_size);
}
