/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace tad {

/// Squared Euclidean distance summed in index order. Every distance that
/// feeds a membership decision goes through here so that indexed and
/// exhaustive searches agree bit for bit.
template <typename A, typename B>
double squared_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a(i)) - static_cast<double>(b(i));
        s += d * d;
    }
    return s;
}

/// Exact nearest-neighbour index over the rows of a dense matrix. Ties go to
/// the lowest row index, matching a linear scan.
template <typename Scalar>
class KdTree {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    struct Hit {
        Eigen::Index index = -1;
        double squared = std::numeric_limits<double>::infinity();
    };

    KdTree() = default;
    explicit KdTree(Matrix points, Eigen::Index leaf_size = 4) : points_(std::move(points)), leaf_size_(leaf_size) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(points_.rows()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        order_ = std::move(order);
        if (!order_.empty()) root_ = build(0, order_.size());
    }

    Eigen::Index size() const { return points_.rows(); }
    Eigen::Index dim() const { return points_.cols(); }
    const Matrix& points() const { return points_; }

    template <typename Derived>
    Hit nearest(const Eigen::MatrixBase<Derived>& q) const {
        Hit best;
        if (root_ >= 0) search(root_, q, best);
        return best;
    }

private:
    struct Node {
        std::size_t begin, end;  // range in order_
        Eigen::Index axis = -1;  // -1 marks a leaf
        double split = 0.0;
        int left = -1, right = -1;
    };

    int build(std::size_t begin, std::size_t end) {
        Node node{begin, end};
        if (static_cast<Eigen::Index>(end - begin) > leaf_size_) {
            // Split on the axis of largest spread.
            double best_spread = -1.0;
            for (Eigen::Index a = 0; a < points_.cols(); ++a) {
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (std::size_t i = begin; i < end; ++i) {
                    const double v = points_(order_[i], a);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                if (hi - lo > best_spread) {
                    best_spread = hi - lo;
                    node.axis = a;
                }
            }
            if (best_spread <= 0.0) {
                node.axis = -1;  // all points coincide
            } else {
                const std::size_t mid = begin + (end - begin) / 2;
                const Eigen::Index axis = node.axis;
                std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order_.begin() + static_cast<std::ptrdiff_t>(mid),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](Eigen::Index x, Eigen::Index y) { return points_(x, axis) < points_(y, axis); });
                node.split = points_(order_[mid], axis);
                const int self = static_cast<int>(nodes_.size());
                nodes_.push_back(node);
                const int l = build(begin, mid);
                const int r = build(mid, end);
                nodes_[static_cast<std::size_t>(self)].left = l;
                nodes_[static_cast<std::size_t>(self)].right = r;
                return self;
            }
        }
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size()) - 1;
    }

    template <typename Derived>
    void search(int id, const Eigen::MatrixBase<Derived>& q, Hit& best) const {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.axis < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const Eigen::Index p = order_[i];
                const double d = squared_distance(points_.row(p), q);
                if (d < best.squared || (d == best.squared && p < best.index)) best = {p, d};
            }
            return;
        }
        // Left holds values <= split, right holds values >= split.
        const double diff = static_cast<double>(q(node.axis)) - node.split;
        const int near = diff <= 0.0 ? node.left : node.right;
        const int far = diff <= 0.0 ? node.right : node.left;
        search(near, q, best);
        // Only prune when strictly outside, so equal-distance ties are still visited.
        if (diff * diff <= best.squared) search(far, q, best);
    }

    Matrix points_;
    Eigen::Index leaf_size_ = 4;
    std::vector<Eigen::Index> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace tad
