#pragma once

#include <random>
#include <vector>

#include "steer/sim.hpp"
#include "steer/trajectory.hpp"

namespace testing_support {

/// Uniform random unit quaternion (Shoemake).
inline steer::Quaternion random_unit_quaternion(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    constexpr double two_pi = 6.283185307179586;
    return {a * std::sin(two_pi * u2), a * std::cos(two_pi * u2), b * std::sin(two_pi * u3), b * std::cos(two_pi * u3)};
}

struct Step {
    double aperture;
    steer::GraspApproachClass wrist;
    double z = 0.1;
};

/// Episode from a compact per-step description.
inline steer::Episode make_episode(const std::vector<Step>& steps, std::string instruction = "pick cup",
                                   std::string id = "ep") {
    steer::Episode e;
    e.episode_id = std::move(id);
    e.instruction = std::move(instruction);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        e.steps.push_back({static_cast<int>(i), {0.5, 0.0, steps[i].z}, steer::wrist_for_class(steps[i].wrist),
                           steps[i].aperture});
    }
    return e;
}

/// n copies of one step.
inline std::vector<Step> repeat(Step s, int n) { return std::vector<Step>(static_cast<std::size_t>(n), s); }

inline std::vector<Step> concat(std::initializer_list<std::vector<Step>> parts) {
    std::vector<Step> out;
    for (const auto& p : parts) {
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

}  // namespace testing_support
