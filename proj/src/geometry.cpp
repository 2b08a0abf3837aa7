#include "steer/geometry.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace steer {

std::string_view to_string(GraspApproachClass c) {
    switch (c) {
        case GraspApproachClass::top_down:
            return "top_down";
        case GraspApproachClass::side:
            return "side";
        case GraspApproachClass::diagonal:
            return "diagonal";
        case GraspApproachClass::upward:
            return "upward";
    }
    return "side";
}

GraspApproachClass approach_class_from_string(std::string_view name) {
    for (const auto c : all_approach_classes) {
        if (to_string(c) == name) {
            return c;
        }
    }
    throw std::invalid_argument("unknown grasp approach class: " + std::string(name));
}

Vec3 approach_vector(const Quaternion& q) {
    if (std::abs(q.norm() - 1.0) > 1e-6) {
        throw std::invalid_argument("approach_vector: quaternion is not unit length");
    }
    // Second column of the rotation matrix of q.
    const Vec3 v{2.0 * (q.x * q.y - q.w * q.z), 1.0 - 2.0 * (q.x * q.x + q.z * q.z),
                 2.0 * (q.y * q.z + q.w * q.x)};
    return normalized(v);
}

GraspApproachClass classify_anchor(const Vec3& direction) {
    const double z = direction.z;
    if (z < -0.9) {
        return GraspApproachClass::top_down;
    }
    if (z < -0.3) {
        return GraspApproachClass::diagonal;
    }
    if (z <= 0.3) {
        return GraspApproachClass::side;
    }
    return GraspApproachClass::upward;
}

std::vector<Anchor> build_anchor_set() {
    std::vector<Anchor> anchors;
    anchors.reserve(anchor_count);
    for (int x = -1; x <= 1; ++x) {
        for (int y = -1; y <= 1; ++y) {
            for (int z = -1; z <= 1; ++z) {
                if (x == 0 && y == 0 && z == 0) {
                    continue;
                }
                const Vec3 dir = normalized(Vec3{double(x), double(y), double(z)});
                anchors.push_back({static_cast<int>(anchors.size()), dir, classify_anchor(dir)});
            }
        }
    }
    return anchors;
}

const std::vector<Anchor>& default_anchors() {
    static const std::vector<Anchor> anchors = build_anchor_set();
    return anchors;
}

const Anchor& nearest_anchor(const Vec3& v, std::span<const Anchor> anchors) {
    if (anchors.empty()) {
        throw std::invalid_argument("nearest_anchor: empty anchor set");
    }
    const Anchor* best = &anchors.front();
    double best_score = dot(v, best->direction);
    for (const Anchor& a : anchors.subspan(1)) {
        const double s = dot(v, a.direction);
        if (s > best_score || (s == best_score && a.id < best->id)) {
            best = &a;
            best_score = s;
        }
    }
    return *best;
}

GraspApproachClass approach_class(const Quaternion& q) {
    return nearest_anchor(approach_vector(q), default_anchors()).semantic_class;
}

ClusterReport cluster_grasps(std::span<const Vec3> vectors, std::span<const Anchor> anchors) {
    ClusterReport report;
    for (const Anchor& a : anchors) {
        report.counts[a.id] = 0;
    }
    if (vectors.empty()) {
        return report;
    }
    for (const int id : classify_batch(vectors, anchors)) {
        ++report.counts[id];
    }
    report.total = vectors.size();
    for (const auto& [id, n] : report.counts) {
        if (n > 0) {
            ++report.occupied_anchor_count;
        }
    }
    return report;
}

std::vector<int> classify_batch(std::span<const Vec3> vectors, std::span<const Anchor> anchors, int workers) {
    if (anchors.empty()) {
        throw std::invalid_argument("classify_batch: empty anchor set");
    }
    std::vector<int> ids(vectors.size());
    const auto n = static_cast<std::ptrdiff_t>(vectors.size());
#ifdef _OPENMP
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        ids[i] = nearest_anchor(vectors[i], anchors).id;
    }
    (void)workers;
    return ids;
}

std::vector<int> classify_batch_serial(std::span<const Vec3> vectors, std::span<const Anchor> anchors) {
    std::vector<int> ids;
    ids.reserve(vectors.size());
    for (const Vec3& v : vectors) {
        ids.push_back(nearest_anchor(v, anchors).id);
    }
    return ids;
}

}  // namespace steer
