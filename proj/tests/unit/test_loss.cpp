/*
   Copyright 2024 The fishnet authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include <Eigen/Core>

#include "fishnet/error.hpp"
#include "fishnet/loss.hpp"

using namespace fishnet;
using namespace fishnet::forecast;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out(k++) = x;
    return out;
}

}  // namespace

TEST_CASE("mse") {
    CHECK(mse(vec({0.1, 0.7, 0.3}), vec({0.1, 0.7, 0.3})) == 0.0);
    CHECK(mse(vec({1, 0}), vec({0, 0})) == 0.5);
    CHECK(mse(vec({0.2}), vec({0.5})) == doctest::Approx(0.09).epsilon(1e-15));
    CHECK_THROWS_AS(mse(vec({1, 0}), vec({0})), invalid_argument);
    CHECK_THROWS_AS(mse(VectorXd(), VectorXd()), invalid_argument);
}

TEST_CASE("weighted mse") {
    CHECK(wmse(vec({1, 0}), vec({0, 0}), vec({1, 0}), 100.0) == 50.5);
    CHECK(wmse(vec({1, 0}), vec({0, 0}), vec({0, 1}), 100.0) == 0.5);
    CHECK_THROWS_AS(wmse(vec({1, 0}), vec({0, 0}), vec({0.5, 0}), 100.0), invalid_argument);
    CHECK_THROWS_AS(wmse(vec({1, 0}), vec({0, 0}), vec({1}), 100.0), invalid_argument);
    CHECK_THROWS_AS(wmse(vec({1, 0}), vec({0, 0}), vec({2, 0}), 100.0), invalid_argument);
}

TEST_CASE("r2") {
    CHECK(r2(vec({0, 1}), vec({0.5, 0.5})) == 0.0);
    CHECK(r2(vec({0, 1}), vec({0.25, 0.75})) == 0.75);
    CHECK(r2(vec({0.3, 0.1, 0.9}), vec({0.3, 0.1, 0.9})) == 1.0);
    CHECK(r2(vec({0, 1}), vec({1, 0})) == -3.0);
    CHECK_THROWS_AS(r2(vec({0.4, 0.4, 0.4}), vec({0.1, 0.2, 0.3})), undefined_metric);
    CHECK_THROWS_AS(r2(vec({0.4}), vec({0.4})), invalid_argument);
}

TEST_CASE("loss identities on random vectors") {
    std::mt19937_64 gen(1234);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> len(2, 300);
    std::bernoulli_distribution flag(0.3);
    for (int trial = 0; trial < 500; ++trial) {
        const auto n = len(gen);
        VectorXd y(n), yh(n), a(n);
        for (int k = 0; k < n; ++k) {
            y(k) = u(gen);
            yh(k) = u(gen);
            a(k) = flag(gen) ? 1.0 : 0.0;
        }
        const double w = 1000.0 * u(gen);
        const double base = mse(y, yh);
        CHECK(base >= 0.0);
        CHECK(wmse(y, yh, VectorXd::Zero(n), w) == base);
        CHECK(wmse(y, yh, a, 0.0) == base);
        CHECK(wmse(y, yh, a, w) >= base);
        CHECK(wmse(y, yh, VectorXd::Ones(n), w) == doctest::Approx((1.0 + w) * base).epsilon(1e-12));

        // doubling every residual quadruples the error
        VectorXd doubled = y + 2.0 * (yh - y);
        CHECK(mse(y, doubled) == doctest::Approx(4.0 * base).epsilon(1e-12));

        CHECK(r2(y, y) == 1.0);
        CHECK(r2(y, VectorXd::Constant(n, y.mean())) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(r2(y, yh) <= 1.0);
    }
}
