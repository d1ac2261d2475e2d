#include <cmath>

#include <doctest.h>

#include "spgsn/dct.hpp"
#include "spgsn/error.hpp"
#include "spgsn/rng.hpp"

using namespace spgsn;

namespace {

// Independent oracle: orthonormal DCT-II of one column by the definition,
// no shared code with dct_basis.
double oracle_coeff(const std::vector<double>& x, std::size_t k) {
    const std::size_t n = x.size();
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
        acc += x[t] * std::cos(M_PI * (2.0 * t + 1.0) * k / (2.0 * n));
    const double s = (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    return s * acc;
}

MotionClip random_clip(std::size_t frames, std::size_t joints, Rng& rng) {
    MotionClip c;
    c.joints = joints;
    c.frame_rate = 25.0;
    c.data.resize(frames * joints * 3);
    for (auto& v : c.data) v = rng.uniform(-1.0, 1.0);
    return c;
}

double frob(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("flatten_spatial: declared column order and roundtrip") {
    MotionClip tiny;
    tiny.joints = 1;
    tiny.data = {1, 2, 3};
    Tensor flat = flatten_spatial(tiny);
    CHECK(flat.shape() == Shape{1, 3});
    CHECK(flat.values() == std::vector<double>{1, 2, 3});

    MotionClip two;
    two.joints = 2;
    two.data = {// frame 0: joint0 (1,2,3), joint1 (4,5,6)
                1, 2, 3, 4, 5, 6,
                // frame 1
                7, 8, 9, 10, 11, 12};
    Tensor f2 = flatten_spatial(two);
    CHECK(f2.shape() == Shape{2, 6});
    CHECK(f2.at(0, 0) == 1);  // x1
    CHECK(f2.at(0, 3) == 4);  // x2
    CHECK(f2.at(1, 5) == 12);

    Rng rng(3);
    MotionClip r = random_clip(5, 3, rng);
    MotionClip back = unflatten_spatial(flatten_spatial(r), r.joints, r.frame_rate);
    CHECK(back == r);
}

TEST_CASE("pad_last_frame") {
    Tensor one = Tensor::from({1, 3}, {1, 2, 3});
    Tensor padded = pad_last_frame(one, 3);
    CHECK(padded.rows() == 4);
    for (std::size_t f = 0; f < 4; ++f)
        for (std::size_t c = 0; c < 3; ++c) CHECK(padded.at(f, c) == one.at(0, c));

    Tensor seq = Tensor::from({2, 2}, {0, 0, 1, 1});
    CHECK(pad_last_frame(seq, 0).values() == seq.values());

    // Constant-velocity input: the padded tail holds, it does not extrapolate.
    Tensor vel = Tensor::from({3, 1}, {0, 1, 2});
    Tensor pv = pad_last_frame(vel, 2);
    CHECK(pv.at(3, 0) == 2.0);
    CHECK(pv.at(4, 0) == 2.0);
}

TEST_CASE("dct_encode: constant column concentrates in c0") {
    const std::size_t n = 7;
    const double v = -0.8125;
    Tensor seq = Tensor::full({n, 3}, v);
    Tensor fp = dct_encode(seq, n);  // [3 x n]
    for (std::size_t row = 0; row < 3; ++row) {
        CHECK(fp.at(row, 0) ==
              doctest::Approx(v * std::sqrt(static_cast<double>(n))).epsilon(1e-12));
        for (std::size_t k = 1; k < n; ++k) CHECK(std::fabs(fp.at(row, k)) < 1e-12);
    }
}

TEST_CASE("dct_encode: N=4 impulse equals the basis column (oracle)") {
    std::vector<double> impulse = {1, 0, 0, 0};
    Tensor seq = Tensor::from({4, 1}, impulse);
    Tensor fp = dct_encode(seq, 4);  // [1 x 4]
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(fp.at(0, k) == doctest::Approx(oracle_coeff(impulse, k)).epsilon(1e-14));
}

TEST_CASE("dct_encode matches the definition oracle on random input") {
    Rng rng(11);
    const std::size_t n = 9;
    std::vector<double> col(n);
    for (auto& x : col) x = rng.uniform(-2.0, 2.0);
    Tensor fp = dct_encode(Tensor::from({n, 1}, col), n);
    for (std::size_t k = 0; k < n; ++k)
        CHECK(fp.at(0, k) == doctest::Approx(oracle_coeff(col, k)).epsilon(1e-12));
}

TEST_CASE("roundtrip at C=N is identity within 1e-9") {
    Rng rng(17);
    const std::size_t n = 12, cols = 6;
    Tensor seq = Tensor::random({n, cols}, [&] { return rng.uniform(-3.0, 3.0); });
    Tensor back = idct_decode(dct_encode(seq, n), n);
    for (std::size_t i = 0; i < seq.size(); ++i)
        CHECK(std::fabs(back.values()[i] - seq.values()[i]) < 1e-9);
}

TEST_CASE("idct_decode: zero coefficients give the zero sequence") {
    Tensor zero = idct_decode(Tensor::zeros({3, 2}), 5);
    for (double v : zero.values()) CHECK(v == 0.0);
}

TEST_CASE("truncation is an exact low-pass on pure basis columns") {
    // The k-th basis column is the impulse at k in the coefficient domain;
    // keeping C <= k coefficients leaves nothing, so the reconstruction is
    // exactly zero.
    const std::size_t n = 8, k = 5;
    for (std::size_t keep = 1; keep <= k; ++keep) {
        Tensor coeffs = Tensor::zeros({1, keep});
        Tensor rec = idct_decode(coeffs, n);
        for (double v : rec.values()) CHECK(v == 0.0);
    }
    // Through the encode path the dropped coefficients pick up only
    // round-off.
    Tensor basis = dct_basis(n);
    std::vector<double> col(n);
    for (std::size_t t = 0; t < n; ++t) col[t] = basis.at(k, t);
    Tensor rec = idct_decode(dct_encode(Tensor::from({n, 1}, col), k), n);
    for (double v : rec.values()) CHECK(std::fabs(v) < 1e-13);
}

TEST_CASE("Parseval: orthonormal transform preserves the Frobenius norm") {
    Rng rng(23);
    Tensor seq = Tensor::random({10, 4}, [&] { return rng.uniform(-1.0, 1.0); });
    Tensor fp = dct_encode(seq, 10);
    CHECK(std::fabs(frob(seq.values()) - frob(fp.values())) < 1e-9);
}

TEST_CASE("dct_encode is linear") {
    Rng rng(29);
    Tensor x = Tensor::random({6, 2}, [&] { return rng.uniform(-1.0, 1.0); });
    Tensor y = Tensor::random({6, 2}, [&] { return rng.uniform(-1.0, 1.0); });
    const double a = 1.75, b = -0.5;
    Tensor lhs = dct_encode(add(scale(x, a), scale(y, b)), 6);
    Tensor rhs = add(scale(dct_encode(x, 6), a), scale(dct_encode(y, 6), b));
    for (std::size_t i = 0; i < lhs.size(); ++i)
        CHECK(lhs.values()[i] == doctest::Approx(rhs.values()[i]).epsilon(1e-12));
}

TEST_CASE("gradients flow through encode and decode") {
    Rng rng(31);
    Tensor seq = Tensor::random({5, 3}, [&] { return rng.uniform(-1.0, 1.0); }, true);
    Tensor weight = Tensor::random({7, 3}, [&] { return rng.uniform(-1.0, 1.0); });
    auto f = [&] {
        Tensor fp = dct_encode(pad_last_frame(seq, 2), 4);
        Tensor rec = idct_decode(fp, 7);
        return sum(mul(rec, weight));
    };
    CHECK(finite_diff_check(f, {{"seq", seq}}).max_rel_err < 1e-6);
}

TEST_CASE("contract errors") {
    Tensor seq = Tensor::zeros({4, 3});
    CHECK_THROWS_AS(dct_encode(seq, 0), ContractError);
    CHECK_THROWS_AS(dct_encode(seq, 5), ContractError);
    CHECK_THROWS_AS(idct_decode(Tensor::zeros({3, 6}), 4), ContractError);
    CHECK_THROWS_AS(pad_last_frame(Tensor::zeros({0, 3}), 1), ContractError);
}
