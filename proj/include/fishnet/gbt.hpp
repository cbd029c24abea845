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

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace fishnet::forecast {

enum class loss_kind { squared, logistic };

loss_kind parse_loss(std::string_view name);
std::string_view to_string(loss_kind loss);

struct gbt_params {
    int num_rounds = 200;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_leaf = 20;
    loss_kind loss = loss_kind::squared;
    std::uint64_t seed = 0;
    /// Row sampling rate per round; 1 disables sampling.
    double subsample = 1.0;
    /// L2 penalty on leaf values.
    double lambda = 1.0;

    void validate() const;
    friend bool operator==(const gbt_params&, const gbt_params&) = default;
};

/// Split nodes send x[feature] < threshold to the left child.
struct tree_node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf = 0.0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const tree_node&, const tree_node&) = default;
};

struct regression_tree {
    std::vector<tree_node> nodes;  // nodes[0] is the root

    template <typename Derived>
    double predict(const Eigen::DenseBase<Derived>& x) const {
        int k = 0;
        while (!nodes[k].is_leaf()) k = x(nodes[k].feature) < nodes[k].threshold ? nodes[k].left : nodes[k].right;
        return nodes[k].leaf;
    }

    /// Number of split levels on the longest root-to-leaf path.
    int depth() const;
    friend bool operator==(const regression_tree&, const regression_tree&) = default;
};

/**
 * Boosted ensemble. The raw score is base_score + learning_rate * sum of leaf
 * values; logistic models report sigmoid(raw) from predict().
 */
class gbt_model {
   public:
    loss_kind loss = loss_kind::squared;
    double base_score = 0.0;
    double learning_rate = 0.1;
    int num_features = 0;
    std::vector<regression_tree> trees;
    /// Training loss before the first round and after each round. Not serialized.
    std::vector<double> loss_history;

    template <typename Derived>
    double raw_score(const Eigen::DenseBase<Derived>& x) const {
        double sum = 0.0;
        for (const auto& t : trees) sum += t.predict(x);
        return base_score + learning_rate * sum;
    }

    template <typename Derived>
    double predict(const Eigen::DenseBase<Derived>& x) const {
        return link(raw_score(x));
    }

    /// One prediction per row of X.
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

    double link(double raw) const;

    friend bool operator==(const gbt_model& a, const gbt_model& b) {
        return a.loss == b.loss && a.base_score == b.base_score && a.learning_rate == b.learning_rate &&
               a.num_features == b.num_features && a.trees == b.trees;
    }
};

/**
 * Newton boosting with exact greedy split search. Ties between equally good
 * splits go to the lowest feature index, then the lowest threshold. A round
 * whose tree would raise the training loss has its leaf values halved until it
 * does not, so loss_history never increases.
 */
gbt_model gbt_train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const gbt_params& params);

nlohmann::json to_json(const gbt_model& model);
gbt_model gbt_from_json(const nlohmann::json& doc);

}  // namespace fishnet::forecast
