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

#include "tad/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tad {

using nlohmann::json;

namespace {

constexpr int kMaxIterations = 300;
constexpr double kShiftTolerance = 1e-6;
constexpr int kRestarts = 10;  // k-means++ starts per fit; lowest inertia wins

// Exact nearest center, lowest index on ties.
std::pair<int, double> nearest_center(const CenterMatrix& centers, const CenterMatrix& x, Eigen::Index i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double d = squared_distance(x.row(i), centers.row(c));
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return {best, best_d};
}

CenterMatrix plus_plus_init(const CenterMatrix& x, int k, Rng& rng) {
    const Eigen::Index n = x.rows();
    CenterMatrix centers(k, x.cols());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    centers.row(0) = x.row(first);
    chosen[static_cast<std::size_t>(first)] = true;
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(x.row(i), centers.row(0));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : d2) total += d;
        Eigen::Index pick = -1;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = d2[static_cast<std::size_t>(i)];
                if (d <= 0.0) continue;
                acc += d;
                pick = i;
                if (acc > r) break;
            }
        }
        if (pick < 0) {
            // Every point already coincides with a center.
            for (Eigen::Index i = 0; i < n && pick < 0; ++i) {
                if (!chosen[static_cast<std::size_t>(i)]) pick = i;
            }
        }
        chosen[static_cast<std::size_t>(pick)] = true;
        centers.row(c) = x.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& d = d2[static_cast<std::size_t>(i)];
            d = std::min(d, squared_distance(x.row(i), centers.row(c)));
        }
    }
    return centers;
}

}  // namespace

namespace detail {

namespace {

ClusterModel lloyd(const CenterMatrix& x, int k, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    ClusterModel model;
    model.k = k;
    model.seed = seed;
    Rng rng(seed);
    model.centers = plus_plus_init(x, k, rng);

    const Eigen::VectorXd x_norm = x.rowwise().squaredNorm();
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k));
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        // Assignment through one matrix product; exact distances are used
        // for the final pass below.
        const Eigen::MatrixXd cross = x * model.centers.transpose();
        const Eigen::VectorXd c_norm = model.centers.rowwise().squaredNorm();
        std::fill(sizes.begin(), sizes.end(), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = x_norm[i] + c_norm[c] - 2.0 * cross(i, c);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[static_cast<std::size_t>(i)] = best;
            ++sizes[static_cast<std::size_t>(best)];
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) continue;
            Eigen::Index far = -1;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int a = assign[static_cast<std::size_t>(i)];
                if (sizes[static_cast<std::size_t>(a)] < 2) continue;
                const double d = squared_distance(x.row(i), model.centers.row(a));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far < 0) break;
            --sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
            assign[static_cast<std::size_t>(far)] = c;
            sizes[static_cast<std::size_t>(c)] = 1;
            model.centers.row(c) = x.row(far);
            ++model.reseeds;
        }
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) inertia += squared_distance(x.row(i), model.centers.row(assign[static_cast<std::size_t>(i)]));
        model.inertia_trace.push_back(inertia);

        CenterMatrix next = CenterMatrix::Zero(k, x.cols());
        for (Eigen::Index i = 0; i < n; ++i) next.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            const auto m = sizes[static_cast<std::size_t>(c)];
            if (m == 0) {
                next.row(c) = model.centers.row(c);
                continue;
            }
            next.row(c) /= static_cast<double>(m);
            shift = std::max(shift, std::sqrt(squared_distance(next.row(c), model.centers.row(c))));
        }
        model.centers = std::move(next);
        model.iterations = iter + 1;
        if (shift < kShiftTolerance) break;
    }

    model.assignments.assign(static_cast<std::size_t>(n), 0);
    std::fill(sizes.begin(), sizes.end(), 0);
    model.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto [c, d] = nearest_center(model.centers, x, i);
        model.assignments[static_cast<std::size_t>(i)] = c;
        ++sizes[static_cast<std::size_t>(c)];
        model.inertia += d;
    }
    for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] == 0) model.empty_clusters.push_back(c);
    }
    return model;
}

}  // namespace

ClusterModel kmeans_fit(const CenterMatrix& x, int k, std::uint64_t seed) {
    if (k < 1) throw ConfigError("k must be positive");
    if (x.rows() < k) {
        throw InsufficientSamples("k=" + std::to_string(k) + " needs at least as many points, got " + std::to_string(x.rows()));
    }
    ClusterModel best = lloyd(x, k, seed);
    for (int r = 1; r < kRestarts; ++r) {
        ClusterModel m = lloyd(x, k, mix(mix(seed, "restart"), static_cast<std::uint64_t>(r)));
        if (m.inertia < best.inertia) best = std::move(m);
    }
    best.seed = seed;
    return best;
}

InertiaCurve sweep_k(const CenterMatrix& x, const std::vector<int>& candidates, std::uint64_t seed,
                     std::vector<ClusterModel>* models) {
    InertiaCurve curve;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i > 0 && candidates[i] <= candidates[i - 1]) throw ConfigError("k candidates must be strictly ascending");
        ClusterModel m = kmeans_fit(x, candidates[i], mix(seed, static_cast<std::uint64_t>(candidates[i])));
        curve.emplace_back(candidates[i], m.inertia);
        if (models) models->push_back(std::move(m));
    }
    return curve;
}

std::vector<double> high_density_radii(ClusterModel& model, const CenterMatrix& x) {
    if (model.assignments.size() != static_cast<std::size_t>(x.rows())) throw DimError("model was not fitted on these vectors");
    if (x.rows() > 0 && x.cols() != model.dim()) throw DimError("vector dim does not match model");
    std::vector<std::vector<double>> dist(static_cast<std::size_t>(model.k));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int c = model.assignments[static_cast<std::size_t>(i)];
        dist[static_cast<std::size_t>(c)].push_back(std::sqrt(squared_distance(x.row(i), model.centers.row(c))));
    }
    model.radii.assign(static_cast<std::size_t>(model.k), 0.0);
    model.empty_clusters.clear();
    for (int c = 0; c < model.k; ++c) {
        auto& d = dist[static_cast<std::size_t>(c)];
        if (d.empty()) {
            model.empty_clusters.push_back(c);
            continue;
        }
        if (d.size() == 1) continue;
        std::sort(d.begin(), d.end());
        // Smallest j with j/m > 1/2 is floor(m/2) + 1, i.e. index m/2.
        model.radii[static_cast<std::size_t>(c)] = d[d.size() / 2];
    }
    return model.radii;
}

ClusterModel fit_density(const CenterMatrix& x, std::vector<int> grid, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    if (n == 0) throw EmptyWindow("no vectors to cluster");
    const int limit = static_cast<int>(std::max<Eigen::Index>(1, n / 2));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    grid.erase(std::remove_if(grid.begin(), grid.end(), [&](int k) { return k < 1 || k > limit; }), grid.end());
    if (grid.empty()) grid.push_back(limit);

    std::vector<ClusterModel> models;
    const InertiaCurve raw = sweep_k(x, grid, seed, &models);
    // Keep the curve strictly decreasing; a candidate that does not improve
    // on a smaller k adds nothing.
    InertiaCurve curve;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!curve.empty() && raw[i].second >= curve.back().second) continue;
        curve.push_back(raw[i]);
        kept.push_back(i);
    }
    std::size_t chosen = kept.front();
    if (curve.size() >= 2) {
        const int k = select_elbow(curve);
        for (std::size_t i = 0; i < curve.size(); ++i) {
            if (curve[i].first == k) chosen = kept[i];
        }
    }
    ClusterModel model = std::move(models[chosen]);
    model.seed = seed;
    model.inertia_sweep = curve;
    high_density_radii(model, x);
    return model;
}

}  // namespace detail

int select_elbow(const InertiaCurve& curve) {
    if (curve.size() < 2) throw CurveTooShort("elbow needs at least two points, got " + std::to_string(curve.size()));
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].first <= curve[i - 1].first) throw ConfigError("elbow curve k must be strictly ascending");
    }
    double lo = curve[0].second, hi = curve[0].second;
    for (const auto& [k, v] : curve) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) return curve.front().first;
    const double k0 = curve.front().first, k1 = curve.back().first;
    auto nx = [&](int k) { return (k - k0) / (k1 - k0); };
    auto ny = [&](double v) { return (v - lo) / (hi - lo); };
    const double x0 = 0.0, y0 = ny(curve.front().second);
    const double x1 = 1.0, y1 = ny(curve.back().second);
    const double len = std::hypot(x1 - x0, y1 - y0);

    int best_k = curve.front().first;
    double best = 0.0;
    for (const auto& [k, v] : curve) {
        const double x = nx(k), y = ny(v);
        const double d = std::abs((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0) / len;
        if (d > best + 1e-12) {
            best = d;
            best_k = k;
        }
    }
    return best_k;
}

DensityIndex::DensityIndex(const ClusterModel& model) : tree_(model.centers), radii_(model.radii) {
    if (radii_.size() != static_cast<std::size_t>(model.centers.rows())) throw ConfigError("cluster model has no radii");
}

json ClusterModel::to_json() const {
    json c = json::array();
    for (Eigen::Index i = 0; i < centers.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < centers.cols(); ++j) row.push_back(centers(i, j));
        c.push_back(std::move(row));
    }
    json sweep = json::array();
    for (const auto& [k_, v] : inertia_sweep) sweep.push_back({k_, v});
    return {{"k", k},
            {"dim", centers.cols()},
            {"seed", seed},
            {"centers", c},
            {"radii", radii},
            {"inertia_sweep", sweep},
            {"inertia", inertia},
            {"empty_clusters", empty_clusters}};
}

ClusterModel ClusterModel::from_json(const json& j) {
    ClusterModel m;
    try {
        m.k = j.at("k").get<int>();
        const auto dim = j.at("dim").get<Eigen::Index>();
        m.seed = j.at("seed").get<std::uint64_t>();
        const json& c = j.at("centers");
        if (static_cast<int>(c.size()) != m.k) throw ConfigError("model.json: centers count != k");
        m.centers.resize(m.k, dim);
        for (int i = 0; i < m.k; ++i) {
            if (static_cast<Eigen::Index>(c[static_cast<std::size_t>(i)].size()) != dim) throw ConfigError("model.json: ragged centers");
            for (Eigen::Index d = 0; d < dim; ++d) m.centers(i, d) = c[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)].get<double>();
        }
        m.radii = j.at("radii").get<std::vector<double>>();
        for (const auto& p : j.at("inertia_sweep")) m.inertia_sweep.emplace_back(p.at(0).get<int>(), p.at(1).get<double>());
        m.inertia = j.value("inertia", 0.0);
        m.empty_clusters = j.value("empty_clusters", std::vector<int>{});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model.json: ") + e.what());
    }
    return m;
}

json DensityReport::to_json() const {
    return {{"window_id", window_id},
            {"filtered", filtered},
            {"extended", extended},
            {"extended_unmasked", extended_unmasked},
            {"extension_pct", extension_pct},
            {"lift_pct", lift_pct ? json(*lift_pct) : json(nullptr)},
            {"k", k}};
}

DensityReport extension_metrics(std::string window_id, std::size_t filtered, std::size_t extended,
                                std::size_t extended_unmasked) {
    if (filtered == 0) throw EmptyWindow("window " + window_id + " has no filtered records");
    DensityReport r;
    r.window_id = std::move(window_id);
    r.filtered = filtered;
    r.extended = extended;
    r.extended_unmasked = extended_unmasked;
    r.extension_pct = 100.0 * static_cast<double>(extended) / static_cast<double>(filtered);
    if (extended_unmasked > 0) {
        r.lift_pct = 100.0 * (static_cast<double>(extended) - static_cast<double>(extended_unmasked)) /
                     static_cast<double>(extended_unmasked);
    }
    return r;
}

}  // namespace tad
