#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace monfermi {

/// Seeded random stream for one trajectory.
///
/// The engine (mt19937_64) and std::seed_seq are fully specified by the standard,
/// but the std distributions are not, so uniforms and normals are derived here
/// by hand to keep draw sequences identical across standard libraries.
class NoiseStream {
public:
    NoiseStream(std::uint64_t master_seed, std::uint64_t trajectory_index,
                std::uint64_t cell_id = 0)
        : master_seed_(master_seed), trajectory_index_(trajectory_index), cell_id_(cell_id) {
        std::seed_seq seq{lo(master_seed), hi(master_seed), lo(cell_id),
                          hi(cell_id),     lo(trajectory_index), hi(trajectory_index)};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t trajectory_index() const { return trajectory_index_; }
    std::uint64_t cell_id() const { return cell_id_; }

private:
    static std::uint32_t lo(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
    static std::uint32_t hi(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

    std::uint64_t master_seed_;
    std::uint64_t trajectory_index_;
    std::uint64_t cell_id_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// `count` independent normal draws with mean 0 and the given variance.
/// Draws are consumed even when the variance is zero so stream positions do not
/// depend on gamma.
inline Eigen::VectorXd gaussian_increments(NoiseStream& ns, int count, double variance) {
    if (variance < 0.0) {
        throw std::invalid_argument("gaussian_increments: negative variance");
    }
    const double sigma = std::sqrt(variance);
    Eigen::VectorXd out(count);
    for (int i = 0; i < count; ++i) out(i) = sigma * ns.normal();
    return out;
}

}  // namespace monfermi
