#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "dressing/clothsim.hpp"
#include "dressing/neural.hpp"
#include "dressing/vec3.hpp"

namespace dressing {

// Delta end-effector command, each component in [-1, 1]. Scaled to meters and
// radians by the episode's action scales.
struct Action {
    Vec3 translation;
    Vec3 rotation;  // axis-angle

    std::array<double, 6> to_array() const {
        return {translation.x, translation.y, translation.z, rotation.x, rotation.y, rotation.z};
    }
    static Action from_array(const std::array<double, 6>& a) {
        return {{a[0], a[1], a[2]}, {a[3], a[4], a[5]}};
    }
    Action clamped() const {
        auto cl = [](Vec3 v) {
            return Vec3{std::clamp(v.x, -1.0, 1.0), std::clamp(v.y, -1.0, 1.0),
                        std::clamp(v.z, -1.0, 1.0)};
        };
        return {cl(translation), cl(rotation)};
    }
    bool within_bounds() const {
        auto ok = [](const Vec3& v) {
            return v.x >= -1.0 && v.x <= 1.0 && v.y >= -1.0 && v.y <= 1.0 && v.z >= -1.0 &&
                   v.z <= 1.0;
        };
        return ok(translation) && ok(rotation);
    }
};

// Segmented point cloud: garment points, the static arm points captured at
// episode start, and the single end-effector point. Feature layout per point
// is [x, y, z, one-hot(garment, arm, eef)].
struct Observation {
    std::vector<Vec3> garment_points;
    std::vector<Vec3> arm_points;
    Vec3 eef_point;

    static constexpr int kFeatureDim = 6;
    PointSet to_point_set() const;
};

// Sliding window of the last N contact-force vectors, newest first.
// Slots before warm-up stay zero.
class ForceHistory {
public:
    explicit ForceHistory(int n) : window_(static_cast<std::size_t>(n)) {}

    int size() const { return static_cast<int>(window_.size()); }
    const std::vector<Vec3>& window() const { return window_; }

    void push(const Vec3& force) {
        for (std::size_t i = window_.size(); i-- > 1;) window_[i] = window_[i - 1];
        window_[0] = force;
    }

    // [f_t.x, f_t.y, f_t.z, f_{t-1}.x, ...] -- 3N values.
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(window_.size() * 3);
        for (const Vec3& f : window_) {
            out.push_back(f.x);
            out.push_back(f.y);
            out.push_back(f.z);
        }
        return out;
    }

    // Keeps the newest `n` entries (used to re-window collected datasets).
    ForceHistory truncated(int n) const {
        ForceHistory h(n);
        for (int i = 0; i < n && i < size(); ++i) h.window_[i] = window_[i];
        return h;
    }

private:
    std::vector<Vec3> window_;
};

}  // namespace dressing
