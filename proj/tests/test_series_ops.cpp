#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stec/series_ops.hpp"

using namespace stec;

namespace {

TensorPtr random_tensor(std::vector<std::int64_t> shape, std::mt19937_64& rng,
                        bool requires_grad = false) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = dist(rng);
    return make_tensor(std::move(shape), std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("moving_average constants, identity kernel, ramp") {
    auto c = full({6, 2}, 4.25);
    for (std::int64_t k : {1, 3, 5, 7}) {
        auto m = moving_average(c, k);
        for (double v : m->data) CHECK(v == doctest::Approx(4.25).epsilon(1e-15));
    }

    std::mt19937_64 rng(1);
    auto x = random_tensor({5, 3}, rng);
    auto id = moving_average(x, 1);
    CHECK(id->data == x->data);

    // Ramp 0..9, kernel 3: interior equals the ramp, endpoints edge-biased.
    std::vector<double> ramp(10);
    for (int i = 0; i < 10; ++i) ramp[static_cast<std::size_t>(i)] = i;
    auto m = moving_average(make_tensor({10, 1}, ramp), 3);
    for (int i = 1; i < 9; ++i)
        CHECK(m->data[static_cast<std::size_t>(i)] == doctest::Approx(i).epsilon(1e-15));
    CHECK(m->data[0] == doctest::Approx((0.0 + 0.0 + 1.0) / 3).epsilon(1e-15));
    CHECK(m->data[9] == doctest::Approx((8.0 + 9.0 + 9.0) / 3).epsilon(1e-15));

    CHECK_THROWS_AS(moving_average(x, 4), TensorError);
}

TEST_CASE("series_decomp reconstruction and constants") {
    auto c = full({7, 2}, -1.5);
    auto d = series_decomp(c, 5);
    for (double v : d.trend->data) CHECK(v == doctest::Approx(-1.5).epsilon(1e-15));
    for (double v : d.seasonal->data) CHECK(std::fabs(v) < 1e-14);

    std::mt19937_64 rng(2);
    auto x = random_tensor({24, 4}, rng);
    auto dx = series_decomp(x, 7);
    for (std::size_t i = 0; i < x->data.size(); ++i)
        CHECK(dx.seasonal->data[i] + dx.trend->data[i] ==
              doctest::Approx(x->data[i]).epsilon(1e-14));
}

TEST_CASE("series_decomp on a pure sine") {
    const std::int64_t p = 16, L = 64;
    std::vector<double> s(static_cast<std::size_t>(L));
    for (std::int64_t t = 0; t < L; ++t)
        s[static_cast<std::size_t>(t)] = std::sin(2.0 * M_PI * static_cast<double>(t) / p);
    auto d = series_decomp(make_tensor({L, 1}, s), p + 1);
    // Interior trend of a zero-mean sine stays near zero.
    for (std::int64_t t = p; t < L - p; ++t)
        CHECK(std::fabs(d.trend->data[static_cast<std::size_t>(t)]) < 0.07);
}

TEST_CASE("autocorr constant and delta cases") {
    auto ones = full({4, 1}, 1.0);
    auto r = autocorr_scores(ones, ones, 1);
    for (double v : r->data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    auto delta = make_tensor({4, 1}, {1, 0, 0, 0});
    auto rd = autocorr_scores(delta, delta, 1);
    CHECK(rd->data[0] == doctest::Approx(0.25).epsilon(1e-12));
    for (int t = 1; t < 4; ++t) CHECK(std::fabs(rd->data[static_cast<std::size_t>(t)]) < 1e-12);

    auto naive = autocorr_scores_naive(delta, delta, 1);
    for (int t = 0; t < 4; ++t)
        CHECK(rd->data[static_cast<std::size_t>(t)] ==
              doctest::Approx(naive->data[static_cast<std::size_t>(t)]).epsilon(1e-12));
}

TEST_CASE("FFT autocorrelation matches the brute-force oracle") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> len(4, 64);
    for (int trial = 0; trial < 200; ++trial) {
        std::int64_t L = len(rng);
        auto q = random_tensor({L, 4}, rng);
        auto k = random_tensor({L, 4}, rng);
        auto fast = autocorr_scores(q, k, 2);
        auto slow = autocorr_scores_naive(q, k, 2);
        for (std::size_t i = 0; i < fast->data.size(); ++i)
            CHECK(std::fabs(fast->data[i] - slow->data[i]) < 1e-9);
    }
}

TEST_CASE("autocorr_scores gradient") {
    std::mt19937_64 rng(4);
    auto q = random_tensor({8, 4}, rng, true);
    auto k = random_tensor({8, 4}, rng, true);
    auto w = random_tensor({2, 8}, rng);
    auto f = [&]() { return sum_all(mul(autocorr_scores(q, k, 2), w)); };
    CHECK(grad_check(f, {q, k}, 1e-6) < 1e-6);
}

TEST_CASE("autocorr_scores input validation") {
    std::mt19937_64 rng(5);
    auto q = random_tensor({8, 4}, rng);
    CHECK_THROWS_AS(autocorr_scores(q, random_tensor({6, 4}, rng), 2), TensorError);
    CHECK_THROWS_AS(autocorr_scores(q, q, 3), TensorError);
}

TEST_CASE("time_delay_agg identity, symmetry, periodicity") {
    AutoCorrConfig cfg{1, 0.5};  // k = floor(0.5 * log 8) = 1
    std::mt19937_64 rng(6);
    auto v = random_tensor({8, 3}, rng);
    auto scores = make_tensor({8}, {5, 0, 0, 0, 0, 0, 0, 0});
    auto out = time_delay_agg(v, scores, cfg);
    for (std::size_t i = 0; i < v->data.size(); ++i)
        CHECK(out->data[i] == doctest::Approx(v->data[i]).epsilon(1e-12));

    // Two equal-score delays with k = 2 average the two rolls.
    AutoCorrConfig cfg2{1, 2.0 / std::log(8.0)};
    auto scores2 = make_tensor({8}, {5, 0, 5, 0, 0, 0, 0, 0});
    auto out2 = time_delay_agg(v, scores2, cfg2);
    auto r0 = roll_rows(v, 0);
    auto r2 = roll_rows(v, 2);
    for (std::size_t i = 0; i < v->data.size(); ++i)
        CHECK(out2->data[i] ==
              doctest::Approx(0.5 * (r0->data[i] + r2->data[i])).epsilon(1e-12));
}

TEST_CASE("sawtooth selects delays that are multiples of its period") {
    const std::int64_t L = 32, p = 8;
    std::vector<double> saw(static_cast<std::size_t>(L));
    for (std::int64_t t = 0; t < L; ++t)
        saw[static_cast<std::size_t>(t)] = static_cast<double>(t % p) / p;
    auto x = make_tensor({L, 1}, saw);
    auto scores = autocorr_scores(x, x, 1);
    // Brute-force ranking: the top floor(log 32) = 3 delays must be multiples of 8.
    std::vector<std::int64_t> order(L);
    for (std::int64_t i = 0; i < L; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return scores->data[static_cast<std::size_t>(a)] >
               scores->data[static_cast<std::size_t>(b)];
    });
    std::int64_t k = topk_delays(1.0, L);
    CHECK(k == 3);
    for (std::int64_t i = 0; i < k; ++i) CHECK(order[static_cast<std::size_t>(i)] % p == 0);
}

TEST_CASE("time_delay_agg weights form a convex combination") {
    std::mt19937_64 rng(7);
    AutoCorrConfig cfg{1, 1.0};
    auto ones = full({16, 2}, 1.0);
    auto scores = random_tensor({16}, rng);
    auto out = time_delay_agg(ones, scores, cfg);
    // Rolls of a constant are the constant; convex weights must sum to 1.
    for (double v : out->data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

namespace {

AutoCorrParams random_ac_params(std::int64_t d, std::mt19937_64& rng) {
    AutoCorrParams p;
    p.wq = random_tensor({d, d}, rng, true);
    p.wk = random_tensor({d, d}, rng, true);
    p.wv = random_tensor({d, d}, rng, true);
    p.wo = random_tensor({d, d}, rng, true);
    p.bv = random_tensor({d}, rng, true);
    p.bo = random_tensor({d}, rng, true);
    return p;
}

}  // namespace

TEST_CASE("auto_correlation_layer constants and shapes") {
    std::mt19937_64 rng(8);
    AutoCorrConfig cfg{2, 1.0};
    auto params = random_ac_params(4, rng);
    auto c = full({8, 4}, 0.7);
    auto out = auto_correlation_layer(c, c, c, cfg, params);
    // Constant inputs give constant projections; every roll is identical.
    for (std::int64_t t = 1; t < 8; ++t)
        for (std::int64_t j = 0; j < 4; ++j)
            CHECK(out->data[static_cast<std::size_t>(t * 4 + j)] ==
                  doctest::Approx(out->data[static_cast<std::size_t>(j)]).epsilon(1e-12));

    // Cross form with longer keys/values truncates to the most recent L_q steps.
    auto q = random_tensor({6, 4}, rng);
    auto kv = random_tensor({10, 4}, rng);
    auto cross = auto_correlation_layer(q, kv, kv, cfg, params);
    CHECK(cross->shape == std::vector<std::int64_t>{6, 4});
    auto shorter = random_tensor({3, 4}, rng);
    auto padded = auto_correlation_layer(q, shorter, shorter, cfg, params);
    CHECK(padded->shape == std::vector<std::int64_t>{6, 4});
}

TEST_CASE("auto_correlation_layer gradient on a tiny config") {
    std::mt19937_64 rng(9);
    AutoCorrConfig cfg{2, 1.0};
    auto params = random_ac_params(4, rng);
    auto q = random_tensor({8, 4}, rng, true);
    auto w = random_tensor({8, 4}, rng);
    auto f = [&]() {
        return sum_all(mul(auto_correlation_layer(q, q, q, cfg, params), w));
    };
    std::vector<TensorPtr> all = {q,         params.wq, params.wk,
                                  params.wv, params.wo, params.bv, params.bo};
    CHECK(grad_check(f, all, 1e-6) < 1e-4);
}

TEST_CASE("auto_correlation_layer output stays bounded") {
    std::mt19937_64 rng(10);
    AutoCorrConfig cfg{2, 1.0};
    auto params = random_ac_params(4, rng);
    for (int trial = 0; trial < 100; ++trial) {
        auto q = random_tensor({12, 4}, rng);
        auto out = auto_correlation_layer(q, q, q, cfg, params);
        double norm = 0.0;
        for (double v : out->data) norm += v * v;
        CHECK(std::isfinite(norm));
        CHECK(norm < 1e6);
    }
}
