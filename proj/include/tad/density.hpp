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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "tad/common.hpp"
#include "tad/kdtree.hpp"

namespace tad {

using CenterMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using InertiaCurve = std::vector<std::pair<int, double>>;

struct ClusterModel {
    int k = 0;
    CenterMatrix centers;
    std::vector<double> radii;             // empty until high_density_radii
    std::vector<int> assignments;          // cluster per input row
    InertiaCurve inertia_sweep;
    std::uint64_t seed = 0;
    double inertia = 0.0;
    std::vector<double> inertia_trace;     // after each assignment step
    std::vector<int> empty_clusters;       // clusters with no members at the end
    int reseeds = 0;
    int iterations = 0;

    Eigen::Index dim() const { return centers.cols(); }
    /// {k, dim, seed, centers, radii, inertia_sweep, inertia}
    nlohmann::json to_json() const;
    static ClusterModel from_json(const nlohmann::json& j);
};

inline const std::vector<int> kDefaultKGrid = {5, 10, 15, 20, 25, 30, 40, 50};

namespace detail {

ClusterModel kmeans_fit(const CenterMatrix& x, int k, std::uint64_t seed);
InertiaCurve sweep_k(const CenterMatrix& x, const std::vector<int>& candidates, std::uint64_t seed,
                     std::vector<ClusterModel>* models);
std::vector<double> high_density_radii(ClusterModel& model, const CenterMatrix& x);
ClusterModel fit_density(const CenterMatrix& x, std::vector<int> grid, std::uint64_t seed);

}  // namespace detail

/// Lloyd's algorithm, best of ten seeded k-means++ starts by inertia. A run
/// converges when no center moves more than 1e-6 or after 300 iterations.
/// Empty clusters are reseeded from the point farthest from its center. Throws InsufficientSamples when
/// there are fewer rows than k.
template <typename Derived>
ClusterModel kmeans_fit(const Eigen::MatrixBase<Derived>& x, int k, std::uint64_t seed) {
    return detail::kmeans_fit(x.template cast<double>(), k, seed);
}

/// One fit per candidate, seeded with mix(seed, k).
template <typename Derived>
InertiaCurve sweep_k(const Eigen::MatrixBase<Derived>& x, const std::vector<int>& candidates, std::uint64_t seed) {
    return detail::sweep_k(x.template cast<double>(), candidates, seed, nullptr);
}

/// Chord-distance knee on the normalized curve; ties and flat curves go to
/// the smallest k. Throws CurveTooShort below two points.
int select_elbow(const InertiaCurve& curve);

/// Sets and returns model.radii: the smallest member distance that covers a
/// strict majority of the cluster. Singleton and empty clusters get 0; empty
/// ones are listed in model.empty_clusters.
template <typename Derived>
std::vector<double> high_density_radii(ClusterModel& model, const Eigen::MatrixBase<Derived>& x) {
    return detail::high_density_radii(model, x.template cast<double>());
}

/// Sweep over `grid` (clipped to k <= max(1, n/2)), elbow, radii. The fit for
/// the chosen k is reused from the sweep.
template <typename Derived>
ClusterModel fit_density(const Eigen::MatrixBase<Derived>& x, const std::vector<int>& grid, std::uint64_t seed) {
    return detail::fit_density(x.template cast<double>(), grid, seed);
}

/// Nearest-center lookup plus the inclusive high-density test.
class DensityIndex {
public:
    explicit DensityIndex(const ClusterModel& model);

    template <typename Derived>
    bool contains(const Eigen::MatrixBase<Derived>& v) const {
        if (v.size() != tree_.dim()) throw DimError("vector dim " + std::to_string(v.size()) + " != model dim " + std::to_string(tree_.dim()));
        const auto hit = tree_.nearest(v);
        return std::sqrt(hit.squared) <= radii_[static_cast<std::size_t>(hit.index)];
    }

private:
    KdTree<double> tree_;
    std::vector<double> radii_;
};

/// Ids of rows inside some high-density ball, sorted.
template <typename Derived>
std::vector<std::string> extend_window(const ClusterModel& model, const Eigen::MatrixBase<Derived>& vectors,
                                       const std::vector<std::string>& ids) {
    if (static_cast<std::size_t>(vectors.rows()) != ids.size()) throw DimError("vector count does not match id count");
    if (vectors.rows() > 0 && vectors.cols() != model.dim()) throw DimError("vector dim does not match model");
    DensityIndex index(model);
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
        if (index.contains(vectors.row(i))) out.push_back(ids[static_cast<std::size_t>(i)]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Fraction of rows inside some high-density ball of `model`.
template <typename Derived>
double relevance_overlap(const Eigen::MatrixBase<Derived>& day, const ClusterModel& model) {
    if (day.rows() == 0) throw EmptyDayError("no vectors for the day");
    if (day.cols() != model.dim()) throw DimError("day vectors dim does not match model");
    DensityIndex index(model);
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < day.rows(); ++i) inside += index.contains(day.row(i)) ? 1 : 0;
    return static_cast<double>(inside) / static_cast<double>(day.rows());
}

struct DensityReport {
    std::string window_id;
    std::size_t filtered = 0;
    std::size_t extended = 0;
    std::size_t extended_unmasked = 0;
    double extension_pct = 0.0;
    std::optional<double> lift_pct;  // undefined when the unmasked baseline is empty
    int k = 0;

    nlohmann::json to_json() const;
};

/// Throws EmptyWindow when filtered == 0.
DensityReport extension_metrics(std::string window_id, std::size_t filtered, std::size_t extended,
                                std::size_t extended_unmasked);

}  // namespace tad
