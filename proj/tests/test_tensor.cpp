#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "aft/spectral.hpp"
#include "aft/tensor.hpp"
#include "test_support.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

using namespace aft;
using testing::random_tensor;

TEST_CASE("tensor shape/data consistency is enforced") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({0, 3}), std::invalid_argument);
    Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t(1, 0) == 3.0);
}

TEST_CASE("matmul identity") {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor a = random_tensor({2, 5}, 7);
    CHECK(rel_error(matmul(eye, a), a) == 0.0);
}

TEST_CASE("matmul hand-expanded 2x2 by 2x1") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {0, 1});
    Tensor c = matmul(a, b);
    CHECK(c(0, 0) == 2.0);
    CHECK(c(1, 0) == 4.0);
}

TEST_CASE("matmul annihilator") {
    Tensor a = random_tensor({3, 4}, 9);
    Tensor z({4, 2});
    CHECK(max_abs(matmul(a, z)) == 0.0);
}

TEST_CASE("matmul rejects mismatched shapes and reports both") {
    Tensor a({2, 3});
    Tensor b({2, 3});
    try {
        matmul(a, b);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
    }
}

TEST_CASE("matmul associativity on random 4x4x4 chains") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Tensor a = random_tensor({4, 4}, 100 + s);
        Tensor b = random_tensor({4, 4}, 200 + s);
        Tensor c = random_tensor({4, 4}, 300 + s);
        CHECK(rel_error(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-12);
    }
}

TEST_CASE("conv2d_circular 1x1 unit kernel is the identity") {
    Tensor x = random_tensor({2, 4, 4}, 11);
    Tensor kernel({2, 2, 1, 1}, {1, 0, 0, 1});
    Tensor bias({2});
    CHECK(rel_error(conv2d_circular(x, kernel, bias), x) == 0.0);
}

TEST_CASE("conv2d_circular all-ones 3x3 on a constant image") {
    const double c = 0.37;
    Tensor x = Tensor::full({1, 4, 4}, c);
    Tensor kernel = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor bias({1});
    Tensor y = conv2d_circular(x, kernel, bias);
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(y[i] == doctest::Approx(9.0 * c).epsilon(1e-12));
    }
}

TEST_CASE("conv2d_circular stamps the kernel with wrap-around") {
    // delta at (0,0); oracle by direct index arithmetic
    Tensor x({1, 4, 5});
    x(0, 0, 0) = 1.0;
    Tensor kernel = random_tensor({1, 1, 3, 3}, 13);
    Tensor bias({1});
    Tensor y = conv2d_circular(x, kernel, bias);
    for (std::size_t yy = 0; yy < 4; ++yy) {
        for (std::size_t xx = 0; xx < 5; ++xx) {
            double want = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::size_t sy = (yy + 4 + dy) % 4;
                    const std::size_t sx = (xx + 5 + dx) % 5;
                    if (sy == 0 && sx == 0) {
                        want += kernel.buffer()[(dy + 1) * 3 + (dx + 1)];
                    }
                }
            }
            CHECK(y(0, yy, xx) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("conv2d_circular rejects even kernels and channel mismatches") {
    Tensor x({2, 4, 4});
    CHECK_THROWS_AS(conv2d_circular(x, Tensor({1, 2, 2, 2}), Tensor({1})), std::invalid_argument);
    CHECK_THROWS_AS(conv2d_circular(x, Tensor({1, 3, 3, 3}), Tensor({1})), std::invalid_argument);
    CHECK_THROWS_AS(conv2d_circular(x, Tensor({1, 2, 3, 3}), Tensor({2})), std::invalid_argument);
}

TEST_CASE("conv2d_circular commutes with integer cyclic shifts") {
    Tensor x = random_tensor({2, 8, 8}, 17);
    Tensor kernel = random_tensor({3, 2, 3, 3}, 18);
    Tensor bias = random_tensor({3}, 19);
    for (long long ky : {1LL, -3LL}) {
        for (long long kx : {2LL, -1LL}) {
            Tensor a = conv2d_circular(spectral::cyclic_roll(x, ky, kx), kernel, bias);
            Tensor b = spectral::cyclic_roll(conv2d_circular(x, kernel, bias), ky, kx);
            CHECK(rel_error(a, b) < 1e-12);
        }
    }
}

TEST_CASE("depthwise conv matches a diagonal dense kernel") {
    Tensor x = random_tensor({3, 4, 4}, 21);
    Tensor dk = random_tensor({3, 3, 3}, 22);
    Tensor bias = random_tensor({3}, 23);
    Tensor dense({3, 3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 9; ++i) {
            dense.buffer()[(c * 3 + c) * 9 + i] = dk.buffer()[c * 9 + i];
        }
    }
    CHECK(rel_error(conv2d_circular_depthwise(x, dk, bias), conv2d_circular(x, dense, bias)) < 1e-13);
}

TEST_CASE("softmax_rows uniform on equal rows") {
    Tensor m = Tensor::full({2, 4}, 3.5);
    Tensor s = softmax_rows(m);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i] == doctest::Approx(0.25).epsilon(1e-14));
    }
}

TEST_CASE("softmax_rows closed-form exp ratio") {
    Tensor m({1, 2}, {0.0, std::log(3.0)});
    Tensor s = softmax_rows(m);
    CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(s(0, 1) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("softmax_rows rows sum to one and ignore additive constants") {
    Tensor m = random_tensor({6, 9}, 29);
    Tensor s = softmax_rows(m);
    for (std::size_t i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 9; ++j) {
            sum += s(i, j);
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    Tensor shifted = m;
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 9; ++j) {
            shifted(i, j) += 7.25;
        }
    }
    CHECK(rel_error(softmax_rows(shifted), s) < 1e-12);
}

TEST_CASE("softmax_rows rejects NaN") {
    Tensor m({1, 2}, {0.0, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(softmax_rows(m), std::invalid_argument);
}
