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

#pragma once

#include <Eigen/Core>

#include "fishnet/error.hpp"

namespace fishnet::forecast {

namespace detail {

template <typename A, typename B>
void check_same_length(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& y_hat) {
    if (y.size() != y_hat.size()) throw invalid_argument("targets and predictions differ in length");
    if (y.size() == 0) throw invalid_argument("metrics need at least one value");
}

}  // namespace detail

/// Mean squared error.
template <typename A, typename B>
double mse(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& y_hat) {
    detail::check_same_length(y, y_hat);
    return (y.derived().array().template cast<double>() - y_hat.derived().array().template cast<double>())
        .square()
        .mean();
}

/// Squared errors weighted by (1 + weight * alpha_i) with alpha_i in {0, 1}.
template <typename A, typename B, typename C>
double wmse(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& y_hat,
            const Eigen::DenseBase<C>& alpha, double weight) {
    detail::check_same_length(y, y_hat);
    if (alpha.size() != y.size()) throw invalid_argument("alpha flags differ in length from targets");
    const auto a = alpha.derived().array().template cast<double>();
    if (((a != 0.0) && (a != 1.0)).any()) throw invalid_argument("alpha flags must be 0 or 1");
    return ((y.derived().array().template cast<double>() - y_hat.derived().array().template cast<double>())
                .square() *
            (1.0 + weight * a))
        .mean();
}

/// Coefficient of determination; throws undefined_metric for constant targets.
template <typename A, typename B>
double r2(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& y_hat) {
    detail::check_same_length(y, y_hat);
    if (y.size() < 2) throw invalid_argument("r2 needs at least two values");
    const auto t = y.derived().array().template cast<double>();
    if ((t == t(0)).all()) throw undefined_metric("r2 is undefined for constant targets");
    const double ss_tot = (t - t.mean()).square().sum();
    const double ss_res = (t - y_hat.derived().array().template cast<double>()).square().sum();
    return 1.0 - ss_res / ss_tot;
}

}  // namespace fishnet::forecast
