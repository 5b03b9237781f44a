#pragma once

#include <string>
#include <vector>

#include "rexo/geometry.hpp"

namespace rexo {

enum class ScheduleKind { cosine, linear };

// Noise schedule over steps t = 0..T. alpha_bar[0] == 1 (no noise at t=0);
// index t holds the cumulative product of alpha over steps 1..t.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // beta[0] == 0 by convention
    std::vector<double> alpha;      // alpha[t] = 1 - beta[t]
    std::vector<double> alpha_bar;  // strictly decreasing, alpha_bar[T] < 0.05
    void validate() const;
};

NoiseSchedule build_schedule(int T, ScheduleKind kind = ScheduleKind::cosine);

// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps
DiffusedBox q_sample(const DiffusedBox& x0, int t, const DiffusedBox& eps,
                     const NoiseSchedule& s);

// Deterministic-by-default reverse jump t -> t_prev from a predicted clean box.
DiffusedBox ddim_step(const DiffusedBox& x_t, const DiffusedBox& x0_hat, int t,
                      int t_prev, double sigma_t, const DiffusedBox& eps_t,
                      const NoiseSchedule& s);

// Ancestral single-step denoise from predicted noise.
DiffusedBox ddpm_step(const DiffusedBox& x_t, const DiffusedBox& eps_hat, int t,
                      double sigma_t, const DiffusedBox& eps_t, const NoiseSchedule& s);

// Stochasticity knob: eta = 0 gives sigma = 0, eta = 1 the ancestral variance.
double ddim_sigma(const NoiseSchedule& s, int t, int t_prev, double eta);

// S evenly spaced step indices ending at T, ascending.
std::vector<int> tau_subsequence(int T, int S);

// Interleaved sin/cos over a geometric frequency ladder (base 10000).
std::vector<double> timestep_embedding(int t, int dim);

void save_schedule_csv(const NoiseSchedule& s, const std::string& path);
NoiseSchedule load_schedule_csv(const std::string& path);

}  // namespace rexo
