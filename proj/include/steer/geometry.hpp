#pragma once

// Grasp-pose geometry: wrist quaternion -> approach vector, the anchor
// direction set, and nearest-anchor (cosine similarity) classification.

#include <array>
#include <map>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steer/math.hpp"

namespace steer {

enum class GraspApproachClass { top_down, side, diagonal, upward };

inline constexpr std::array<GraspApproachClass, 4> all_approach_classes{
    GraspApproachClass::top_down, GraspApproachClass::side, GraspApproachClass::diagonal,
    GraspApproachClass::upward};

/// "top_down", "side", "diagonal", "upward".
std::string_view to_string(GraspApproachClass c);
GraspApproachClass approach_class_from_string(std::string_view name);

/// Canonical gripper axis in the wrist frame.
inline constexpr Vec3 gripper_axis{0.0, 1.0, 0.0};

/// Rotates the gripper axis (0,1,0) by `q`. Throws std::invalid_argument when
/// |‖q‖ - 1| > 1e-6. The result is renormalized to unit length.
Vec3 approach_vector(const Quaternion& q);

struct Anchor {
    int id = 0;
    Vec3 direction;
    GraspApproachClass semantic_class = GraspApproachClass::side;
};

inline constexpr std::size_t anchor_count = 26;

/// Threshold rule on the z component: z < -0.9 top_down, [-0.9, -0.3) diagonal,
/// |z| <= 0.3 side, z > 0.3 upward.
GraspApproachClass classify_anchor(const Vec3& direction);

/// All normalized nonzero vectors with components in {-1, 0, 1}, ids assigned
/// in lexicographic (x, y, z) order.
std::vector<Anchor> build_anchor_set();

/// The process-wide anchor set (built once).
const std::vector<Anchor>& default_anchors();

/// Anchor maximizing dot(v, direction); exact ties go to the lowest id.
/// Throws std::invalid_argument on an empty anchor set.
const Anchor& nearest_anchor(const Vec3& v, std::span<const Anchor> anchors);

/// Semantic class of an arbitrary wrist orientation.
GraspApproachClass approach_class(const Quaternion& q);

struct ClusterReport {
    std::map<int, std::size_t> counts;  // every anchor id, including empty ones
    std::size_t occupied_anchor_count = 0;
    std::size_t total = 0;
};

ClusterReport cluster_grasps(std::span<const Vec3> vectors, std::span<const Anchor> anchors);

/// Nearest-anchor ids for a batch of vectors, parallelized with OpenMP.
std::vector<int> classify_batch(std::span<const Vec3> vectors, std::span<const Anchor> anchors,
                                int workers = 0);
/// Serial reference for classify_batch.
std::vector<int> classify_batch_serial(std::span<const Vec3> vectors, std::span<const Anchor> anchors);

}  // namespace steer
