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

#include "fishnet/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fishnet/error.hpp"

namespace fishnet::forecast {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double training_loss(loss_kind loss, const Eigen::VectorXd& y, const Eigen::VectorXd& score) {
    if (loss == loss_kind::squared) return (y - score).squaredNorm() / static_cast<double>(y.size());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) sum += softplus(score(i)) - y(i) * score(i);
    return sum / static_cast<double>(y.size());
}

struct split_candidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct node_stats {
    double g = 0.0;
    double h = 0.0;
    std::int64_t n = 0;
};

struct scan_state {
    double gl = 0.0;
    double hl = 0.0;
    std::int64_t nl = 0;
    double last = 0.0;
};

double score_term(double g, double h, double lambda) { return g * g / (h + lambda); }

// Grows one tree level by level. Samples with node_of[i] < 0 are not used.
regression_tree grow_tree(const Eigen::MatrixXd& X, const std::vector<std::vector<int>>& order,
                          const Eigen::VectorXd& g, const Eigen::VectorXd& h, std::vector<int>& node_of,
                          const gbt_params& p) {
    const auto T = static_cast<std::int64_t>(X.rows());
    const int F = static_cast<int>(X.cols());
    std::vector<tree_node> nodes(1);
    std::vector<node_stats> stats(1);
    for (std::int64_t i = 0; i < T; ++i) {
        if (node_of[i] != 0) continue;
        stats[0].g += g(i);
        stats[0].h += h(i);
        ++stats[0].n;
    }

    std::vector<int> frontier{0};
    for (int depth = 0; depth < p.max_depth && !frontier.empty(); ++depth) {
        std::vector<int> slot(nodes.size(), -1);
        for (std::size_t k = 0; k < frontier.size(); ++k) slot[frontier[k]] = static_cast<int>(k);
        std::vector<split_candidate> best(frontier.size());

        for (int f = 0; f < F; ++f) {
            std::vector<scan_state> state(frontier.size());
            for (int i : order[f]) {
                const int nd = node_of[i];
                if (nd < 0 || slot[nd] < 0) continue;
                const int k = slot[nd];
                auto& s = state[k];
                const double x = X(i, f);
                if (s.nl > 0 && x > s.last) {
                    const auto& tot = stats[nd];
                    if (s.nl >= p.min_samples_leaf && tot.n - s.nl >= p.min_samples_leaf) {
                        double gain = score_term(s.gl, s.hl, p.lambda) +
                                      score_term(tot.g - s.gl, tot.h - s.hl, p.lambda) -
                                      score_term(tot.g, tot.h, p.lambda);
                        if (gain > best[k].gain) best[k] = {gain, f, x};
                    }
                }
                s.gl += g(i);
                s.hl += h(i);
                ++s.nl;
                s.last = x;
            }
        }

        std::vector<int> next;
        for (std::size_t k = 0; k < frontier.size(); ++k) {
            if (best[k].feature < 0) continue;
            const int nd = frontier[k];
            const int left = static_cast<int>(nodes.size());
            nodes[nd].feature = best[k].feature;
            nodes[nd].threshold = best[k].threshold;
            nodes[nd].left = left;
            nodes[nd].right = left + 1;
            nodes.resize(nodes.size() + 2);
            stats.resize(stats.size() + 2);
            next.push_back(left);
            next.push_back(left + 1);
        }
        if (next.empty()) break;
        for (std::int64_t i = 0; i < T; ++i) {
            const int nd = node_of[i];
            if (nd < 0 || nodes[nd].is_leaf() || nodes[nd].left < 0 || slot[nd] < 0) continue;
            const int child = X(i, nodes[nd].feature) < nodes[nd].threshold ? nodes[nd].left : nodes[nd].right;
            node_of[i] = child;
            stats[child].g += g(i);
            stats[child].h += h(i);
            ++stats[child].n;
        }
        frontier = std::move(next);
    }

    for (std::size_t k = 0; k < nodes.size(); ++k)
        if (nodes[k].is_leaf()) nodes[k].leaf = -stats[k].g / (stats[k].h + p.lambda);
    return {std::move(nodes)};
}

// Re-lays a tree out in depth-first pre-order so trained and parsed trees compare equal.
void preorder(const std::vector<tree_node>& in, int k, std::vector<tree_node>& out) {
    const int at = static_cast<int>(out.size());
    out.push_back(in[k]);
    if (in[k].is_leaf()) return;
    out[at].left = static_cast<int>(out.size());
    preorder(in, in[k].left, out);
    out[at].right = static_cast<int>(out.size());
    preorder(in, in[k].right, out);
}

int depth_below(const std::vector<tree_node>& nodes, int k) {
    if (nodes[k].is_leaf()) return 0;
    return 1 + std::max(depth_below(nodes, nodes[k].left), depth_below(nodes, nodes[k].right));
}

nlohmann::json node_json(const std::vector<tree_node>& nodes, int k) {
    const auto& n = nodes[k];
    if (n.is_leaf()) return {{"leaf", n.leaf}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"left", node_json(nodes, n.left)},
            {"right", node_json(nodes, n.right)}};
}

void parse_node(const nlohmann::json& doc, int num_features, int depth, std::vector<tree_node>& out) {
    if (!doc.is_object()) throw invalid_argument("tree node must be an object");
    if (depth > 64) throw invalid_argument("tree is nested too deeply");
    const int at = static_cast<int>(out.size());
    out.emplace_back();
    if (doc.contains("leaf")) {
        if (doc.size() != 1) throw invalid_argument("leaf node has extra keys");
        out[at].leaf = doc.at("leaf").get<double>();
        if (!std::isfinite(out[at].leaf)) throw invalid_argument("leaf value is not finite");
        return;
    }
    if (doc.size() != 4) throw invalid_argument("split node needs feature, threshold, left and right");
    const int f = doc.at("feature").get<int>();
    if (f < 0 || f >= num_features) throw invalid_argument("split feature index out of range");
    const double t = doc.at("threshold").get<double>();
    if (!std::isfinite(t)) throw invalid_argument("split threshold is not finite");
    out[at].feature = f;
    out[at].threshold = t;
    out[at].left = static_cast<int>(out.size());
    parse_node(doc.at("left"), num_features, depth + 1, out);
    out[at].right = static_cast<int>(out.size());
    parse_node(doc.at("right"), num_features, depth + 1, out);
}

}  // namespace

loss_kind parse_loss(std::string_view name) {
    if (name == "squared") return loss_kind::squared;
    if (name == "logistic") return loss_kind::logistic;
    throw invalid_argument("unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(loss_kind loss) { return loss == loss_kind::squared ? "squared" : "logistic"; }

void gbt_params::validate() const {
    if (num_rounds < 1) throw invalid_argument("num_rounds must be at least 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw invalid_argument("learning_rate must lie in (0, 1]");
    if (max_depth < 1) throw invalid_argument("max_depth must be at least 1");
    if (min_samples_leaf < 1) throw invalid_argument("min_samples_leaf must be at least 1");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw invalid_argument("subsample must lie in (0, 1]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw invalid_argument("lambda must be non-negative");
}

int regression_tree::depth() const { return nodes.empty() ? 0 : depth_below(nodes, 0); }

double gbt_model::link(double raw) const {
    return loss == loss_kind::logistic ? 1.0 / (1.0 + std::exp(-raw)) : raw;
}

Eigen::VectorXd gbt_model::predict(const Eigen::MatrixXd& X) const {
    if (X.cols() != num_features) throw invalid_argument("feature matrix has the wrong number of columns");
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict(X.row(i));
    return out;
}

gbt_model gbt_train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const gbt_params& params) {
    params.validate();
    const auto T = static_cast<std::int64_t>(X.rows());
    const int F = static_cast<int>(X.cols());
    if (y.size() != T) throw invalid_argument("features and targets differ in length");
    if (F < 1) throw invalid_argument("need at least one feature");
    if (T < 2 * static_cast<std::int64_t>(params.min_samples_leaf))
        throw invalid_argument("need at least 2 * min_samples_leaf training rows, got " + std::to_string(T));
    if (!X.allFinite()) throw invalid_argument("feature matrix contains non-finite values");
    if (!y.allFinite()) throw invalid_argument("targets contain non-finite values");
    if (params.loss == loss_kind::logistic && ((y.array() != 0.0) && (y.array() != 1.0)).any())
        throw invalid_argument("logistic targets must be 0 or 1");

    gbt_model model;
    model.loss = params.loss;
    model.learning_rate = params.learning_rate;
    model.num_features = F;
    // shift by y(0) so a constant target gives its exact value
    const double mean = y(0) + (y.array() - y(0)).mean();
    if (params.loss == loss_kind::squared) {
        model.base_score = mean;
    } else {
        const double p = std::clamp(mean, 1e-6, 1.0 - 1e-6);
        model.base_score = std::log(p / (1.0 - p));
    }

    std::vector<std::vector<int>> order(F);
    for (int f = 0; f < F; ++f) {
        order[f].resize(static_cast<std::size_t>(T));
        std::iota(order[f].begin(), order[f].end(), 0);
        std::stable_sort(order[f].begin(), order[f].end(), [&](int a, int b) { return X(a, f) < X(b, f); });
    }

    Eigen::VectorXd leaf_sum = Eigen::VectorXd::Zero(T);
    Eigen::VectorXd score = Eigen::VectorXd::Constant(T, model.base_score);
    double current = training_loss(params.loss, y, score);
    model.loss_history.push_back(current);

    std::mt19937_64 rng(params.seed);
    Eigen::VectorXd g(T), h(T), delta(T);
    std::vector<int> node_of(static_cast<std::size_t>(T));

    for (int round = 0; round < params.num_rounds; ++round) {
        if (params.loss == loss_kind::squared) {
            g = score - y;
            h.setOnes();
        } else {
            for (std::int64_t i = 0; i < T; ++i) {
                const double p = model.link(score(i));
                g(i) = p - y(i);
                h(i) = std::max(p * (1.0 - p), 1e-16);
            }
        }

        std::int64_t used = T;
        if (params.subsample < 1.0) {
            used = 0;
            for (std::int64_t i = 0; i < T; ++i) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                node_of[i] = u < params.subsample ? 0 : -1;
                used += node_of[i] == 0;
            }
        }
        if (used == T || used < 2 * static_cast<std::int64_t>(params.min_samples_leaf))
            std::fill(node_of.begin(), node_of.end(), 0);

        regression_tree tree = grow_tree(X, order, g, h, node_of, params);
        std::vector<tree_node> canonical;
        preorder(tree.nodes, 0, canonical);
        tree.nodes = std::move(canonical);

        for (std::int64_t i = 0; i < T; ++i) delta(i) = tree.predict(X.row(i));
        auto trial_loss = [&] {
            score = (model.base_score + model.learning_rate * (leaf_sum + delta).array()).matrix();
            return training_loss(params.loss, y, score);
        };
        double next = trial_loss();
        for (int halving = 0; next > current && halving < 60; ++halving) {
            for (auto& n : tree.nodes) n.leaf *= 0.5;
            delta *= 0.5;
            next = trial_loss();
        }
        if (next > current) {
            for (auto& n : tree.nodes) n.leaf = 0.0;
            delta.setZero();
            next = trial_loss();
        }
        leaf_sum += delta;
        current = next;
        model.loss_history.push_back(current);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

nlohmann::json to_json(const gbt_model& model) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : model.trees) trees.push_back(node_json(t.nodes, 0));
    return {{"loss", std::string(to_string(model.loss))},
            {"base_score", model.base_score},
            {"learning_rate", model.learning_rate},
            {"num_features", model.num_features},
            {"trees", std::move(trees)}};
}

gbt_model gbt_from_json(const nlohmann::json& doc) {
    try {
        gbt_model m;
        m.loss = parse_loss(doc.at("loss").get<std::string>());
        m.base_score = doc.at("base_score").get<double>();
        m.learning_rate = doc.at("learning_rate").get<double>();
        m.num_features = doc.at("num_features").get<int>();
        if (m.num_features < 1) throw invalid_argument("num_features must be positive");
        if (!std::isfinite(m.base_score)) throw invalid_argument("base_score is not finite");
        for (const auto& t : doc.at("trees")) {
            regression_tree tree;
            parse_node(t, m.num_features, 0, tree.nodes);
            m.trees.push_back(std::move(tree));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_argument(std::string("malformed boosted model: ") + e.what());
    }
}

}  // namespace fishnet::forecast
