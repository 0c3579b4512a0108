#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbwm::env {

inline constexpr int kLidarRays = 180;
inline constexpr int kNumFeatures = 7;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

// Screen coordinates: x grows to the right, y grows downward, origin at the
// top-left corner. Distances are pixels, times are frames.
struct EnvConfig {
    int screen_width = 288;
    int screen_height = 512;
    double ground_y = 404.0;
    double gravity = 1.0;
    double flap_impulse = -9.0;
    double max_fall_speed = 10.0;
    double pipe_speed = 4.0;
    double pipe_gap = 100.0;
    double pipe_width = 52.0;
    double pipe_spacing = 200.0;
    double rotation_rate = 3.0;
    double max_rotation_up = 45.0;
    double max_rotation_down = -90.0;
    double lidar_max_range = 288.0;
    std::uint64_t rng_seed = 0;

    double player_x = 57.0;
    double player_width = 34.0;
    double player_height = 24.0;
    double start_y = 244.0;
    double first_pipe_x = 180.0;

    void validate() const;

    // Stable 64-bit digest over every field, used to tag datasets and
    // checkpoints built against this configuration.
    std::uint64_t digest() const;

    bool operator==(const EnvConfig&) const = default;
};

enum class Action : std::uint8_t { Noop = 0, Flap = 1 };

struct Pipe {
    double x = 0.0;  // left edge
    double gap_center_y = 0.0;
    bool operator==(const Pipe&) const = default;
};

struct EnvState {
    double player_y = 0.0;
    double player_vy = 0.0;
    double player_rot = 0.0;
    std::vector<Pipe> pipes;  // ascending x
    int frame = 0;
    bool terminated = false;
    std::mt19937_64 rng;  // pipe generator

    bool operator==(const EnvState&) const = default;
};

using Observation = std::array<double, kLidarRays>;

enum class Feature : int {
    PlayerY = 0,
    PlayerVy,
    PlayerRot,
    NextPipeDx,
    NextPipeGapY,
    SecondPipeDx,
    SecondPipeGapY,
};

using WorldFeatures = std::array<double, kNumFeatures>;

const char* feature_name(Feature f);
inline const char* feature_name(int k) { return feature_name(static_cast<Feature>(k)); }

EnvState reset(const EnvConfig& config, std::uint64_t seed);
EnvState step(const EnvState& state, Action action, const EnvConfig& config);

// True when the player's collision box overlaps a pipe, or the player's
// reference point touches the floor or ceiling.
bool collides(const EnvState& state, const EnvConfig& config);

// Angle of LIDAR ray k in degrees, measured from the +x axis with positive
// angles pointing up the screen. Ray 0 points straight down, ray 179 points
// one degree short of straight up.
double lidar_ray_angle(int k);

// Exact distance along a ray from the player to the nearest obstacle region
// (pipe rectangles, the half-planes above the ceiling, below the floor and
// right of the screen edge, and left of x = 0), clipped to lidar_max_range.
double ray_distance(const EnvState& state, const EnvConfig& config, double angle_deg);

Observation lidar_scan(const EnvState& state, const EnvConfig& config);

// Affine per-quantity maps to [0, 1]; constants depend only on the config.
struct FeatureScale {
    std::array<double, kNumFeatures> offset{};
    std::array<double, kNumFeatures> span{};

    static FeatureScale from(const EnvConfig& config);
    double normalize(int k, double raw) const { return (raw - offset[k]) / span[k]; }
    double denormalize(int k, double v) const { return v * span[k] + offset[k]; }
};

// Pipes whose right edge has not yet passed the player's left edge.
std::vector<Pipe> pipes_ahead(const EnvState& state, const EnvConfig& config);

WorldFeatures world_features(const EnvState& state, const EnvConfig& config);

}  // namespace fbwm::env
