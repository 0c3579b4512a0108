#include "fbwm/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fbwm/digest.hpp"

namespace fbwm::env {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double next_gap_center(std::mt19937_64& rng, const EnvConfig& c)
{
    const double lo = 0.2 * c.ground_y + 0.5 * c.pipe_gap;
    const double hi = 0.8 * c.ground_y - 0.5 * c.pipe_gap;
    return lo + (hi - lo) * uniform01(rng);
}

void refill_pipes(EnvState& s, const EnvConfig& c)
{
    if (s.pipes.empty()) s.pipes.push_back({static_cast<double>(c.screen_width), next_gap_center(s.rng, c)});
    while (s.pipes.back().x < c.screen_width) {
        const double x = s.pipes.back().x + c.pipe_spacing;
        s.pipes.push_back({x, next_gap_center(s.rng, c)});
    }
}

// Entry distance of the ray into an axis-aligned closed box, or +inf.
double ray_box(double ox, double oy, double dx, double dy,
               double x0, double x1, double y0, double y1)
{
    double t_enter = 0.0;
    double t_exit = kInf;
    auto slab = [&](double o, double d, double lo, double hi) {
        if (d == 0.0) {
            return o >= lo && o <= hi;
        }
        double ta = (lo - o) / d;
        double tb = (hi - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t_enter = std::max(t_enter, ta);
        t_exit = std::min(t_exit, tb);
        return t_enter <= t_exit;
    };
    if (!slab(ox, dx, x0, x1) || !slab(oy, dy, y0, y1)) {
        return kInf;
    }
    return t_enter;
}

// Distance to the half-plane {p : p >= bound} (sign = +1) or {p <= bound}.
double ray_half_plane(double o, double d, double bound, int sign)
{
    if (sign * (o - bound) >= 0.0) return 0.0;
    if (sign * d <= 0.0) return kInf;
    return (bound - o) / d;
}

}  // namespace

void EnvConfig::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigError(std::string("env config: ") + name + " must be > 0");
    };
    positive(screen_width, "screen_width");
    positive(screen_height, "screen_height");
    positive(ground_y, "ground_y");
    positive(gravity, "gravity");
    positive(max_fall_speed, "max_fall_speed");
    positive(pipe_speed, "pipe_speed");
    positive(pipe_gap, "pipe_gap");
    positive(pipe_width, "pipe_width");
    positive(pipe_spacing, "pipe_spacing");
    positive(rotation_rate, "rotation_rate");
    positive(lidar_max_range, "lidar_max_range");
    positive(player_x, "player_x");
    positive(player_width, "player_width");
    positive(player_height, "player_height");
    positive(start_y, "start_y");
    positive(first_pipe_x, "first_pipe_x");
    if (!(flap_impulse < 0.0)) throw ConfigError("env config: flap_impulse must be < 0");
    if (!(pipe_gap < screen_height)) throw ConfigError("env config: pipe_gap must be < screen_height");
    if (ground_y > screen_height) throw ConfigError("env config: ground_y must be <= screen_height");
    if (!(start_y < ground_y)) throw ConfigError("env config: start_y must be above the ground");
    if (!(pipe_gap < 0.6 * ground_y)) throw ConfigError("env config: pipe_gap leaves no room for gap placement");
    if (!(max_rotation_down < max_rotation_up)) throw ConfigError("env config: max_rotation_down must be < max_rotation_up");
}

std::uint64_t EnvConfig::digest() const
{
    Digest d;
    d.add(screen_width).add(screen_height).add(ground_y).add(gravity).add(flap_impulse);
    d.add(max_fall_speed).add(pipe_speed).add(pipe_gap).add(pipe_width).add(pipe_spacing);
    d.add(rotation_rate).add(max_rotation_up).add(max_rotation_down).add(lidar_max_range);
    d.add(rng_seed).add(player_x).add(player_width).add(player_height).add(start_y).add(first_pipe_x);
    return d.value();
}

const char* feature_name(Feature f)
{
    switch (f) {
    case Feature::PlayerY: return "player_y";
    case Feature::PlayerVy: return "player_vy";
    case Feature::PlayerRot: return "player_rot";
    case Feature::NextPipeDx: return "next_pipe_dx";
    case Feature::NextPipeGapY: return "next_pipe_gap_y";
    case Feature::SecondPipeDx: return "second_pipe_dx";
    case Feature::SecondPipeGapY: return "second_pipe_gap_y";
    }
    return "?";
}

EnvState reset(const EnvConfig& config, std::uint64_t seed)
{
    config.validate();
    EnvState s;
    s.rng.seed(seed);
    s.player_y = config.start_y;
    s.pipes.push_back({config.first_pipe_x, next_gap_center(s.rng, config)});
    refill_pipes(s, config);
    return s;
}

bool collides(const EnvState& s, const EnvConfig& c)
{
    if (s.player_y >= c.ground_y || s.player_y <= 0.0) return true;
    const double left = c.player_x - 0.5 * c.player_width;
    const double right = c.player_x + 0.5 * c.player_width;
    const double top = s.player_y - 0.5 * c.player_height;
    const double bottom = s.player_y + 0.5 * c.player_height;
    for (const Pipe& p : s.pipes) {
        if (right <= p.x || left >= p.x + c.pipe_width) continue;
        if (top < p.gap_center_y - 0.5 * c.pipe_gap || bottom > p.gap_center_y + 0.5 * c.pipe_gap) {
            return true;
        }
    }
    return false;
}

EnvState step(const EnvState& state, Action action, const EnvConfig& c)
{
    if (state.terminated) throw UsageError("step called on a terminated state");
    EnvState s = state;
    if (action == Action::Flap) {
        s.player_vy = c.flap_impulse;
        s.player_rot = c.max_rotation_up;
    } else {
        s.player_vy = std::min(s.player_vy + c.gravity, c.max_fall_speed);
        s.player_rot = std::max(s.player_rot - c.rotation_rate, c.max_rotation_down);
    }
    s.player_y += s.player_vy;

    for (Pipe& p : s.pipes) p.x -= c.pipe_speed;
    std::erase_if(s.pipes, [&](const Pipe& p) { return p.x + c.pipe_width < 0.0; });
    refill_pipes(s, c);

    s.terminated = collides(s, c);
    ++s.frame;
    return s;
}

double lidar_ray_angle(int k)
{
    return -90.0 + static_cast<double>(k);
}

double ray_distance(const EnvState& s, const EnvConfig& c, double angle_deg)
{
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double dx = std::cos(a);
    const double dy = -std::sin(a);
    const double ox = c.player_x;
    const double oy = s.player_y;

    double best = ray_half_plane(oy, dy, 0.0, -1);
    best = std::min(best, ray_half_plane(oy, dy, c.ground_y, +1));
    best = std::min(best, ray_half_plane(ox, dx, static_cast<double>(c.screen_width), +1));
    best = std::min(best, ray_half_plane(ox, dx, 0.0, -1));
    for (const Pipe& p : s.pipes) {
        const double gap_top = p.gap_center_y - 0.5 * c.pipe_gap;
        const double gap_bottom = p.gap_center_y + 0.5 * c.pipe_gap;
        best = std::min(best, ray_box(ox, oy, dx, dy, p.x, p.x + c.pipe_width, 0.0, gap_top));
        best = std::min(best, ray_box(ox, oy, dx, dy, p.x, p.x + c.pipe_width, gap_bottom, c.ground_y));
    }
    return std::min(best, c.lidar_max_range);
}

Observation lidar_scan(const EnvState& s, const EnvConfig& c)
{
    Observation obs;
    for (int k = 0; k < kLidarRays; ++k) {
        obs[k] = ray_distance(s, c, lidar_ray_angle(k)) / c.lidar_max_range;
    }
    return obs;
}

FeatureScale FeatureScale::from(const EnvConfig& c)
{
    FeatureScale f;
    const double v = std::max(-c.flap_impulse, c.max_fall_speed);
    const double r = std::max(std::abs(c.max_rotation_up), std::abs(c.max_rotation_down));
    const double dx_lo = c.player_x - 0.5 * c.player_width - c.pipe_width;
    const double dx_hi = c.screen_width + c.pipe_spacing;

    f.offset[0] = 0.0;
    f.span[0] = c.ground_y;
    f.offset[1] = -v;
    f.span[1] = 2.0 * v;
    f.offset[2] = -r;
    f.span[2] = 2.0 * r;
    for (int k : {3, 5}) {
        f.offset[k] = dx_lo;
        f.span[k] = dx_hi - dx_lo;
    }
    for (int k : {4, 6}) {
        f.offset[k] = 0.0;
        f.span[k] = c.ground_y;
    }
    return f;
}

std::vector<Pipe> pipes_ahead(const EnvState& s, const EnvConfig& c)
{
    std::vector<Pipe> out;
    const double left = c.player_x - 0.5 * c.player_width;
    for (const Pipe& p : s.pipes) {
        if (p.x + c.pipe_width > left) out.push_back(p);
    }
    return out;
}

WorldFeatures world_features(const EnvState& s, const EnvConfig& c)
{
    const FeatureScale scale = FeatureScale::from(c);
    WorldFeatures f;
    f[0] = scale.normalize(0, s.player_y);
    f[1] = scale.normalize(1, s.player_vy);
    f[2] = scale.normalize(2, s.player_rot);
    const std::vector<Pipe> ahead = pipes_ahead(s, c);
    for (int slot = 0; slot < 2; ++slot) {
        const int kx = 3 + 2 * slot;
        if (slot < static_cast<int>(ahead.size())) {
            f[kx] = scale.normalize(kx, ahead[slot].x);
            f[kx + 1] = scale.normalize(kx + 1, ahead[slot].gap_center_y);
        } else {
            f[kx] = 1.0;
            f[kx + 1] = 0.5;
        }
    }
    return f;
}

}  // namespace fbwm::env
