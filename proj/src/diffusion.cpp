#include "rexo/diffusion.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace rexo {

namespace {

constexpr double kBetaMax = 0.999;

void check_step(const NoiseSchedule& s, int t, int lo) {
    if (t < lo || t > s.T)
        throw std::out_of_range("diffusion: step " + std::to_string(t) +
                                " outside [" + std::to_string(lo) + ", " +
                                std::to_string(s.T) + "]");
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void NoiseSchedule::validate() const {
    if (T < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
    if (beta.size() != static_cast<size_t>(T) + 1 || alpha.size() != beta.size() ||
        alpha_bar.size() != beta.size())
        throw std::invalid_argument("NoiseSchedule: arrays must have length T + 1");
    if (alpha_bar[0] < 1.0 - 1e-6 || alpha_bar[0] > 1.0)
        throw std::invalid_argument("NoiseSchedule: alpha_bar[0] must be 1");
    for (int t = 1; t <= T; ++t) {
        if (!(beta[t] > 0.0) || !(beta[t] < 1.0))
            throw std::invalid_argument("NoiseSchedule: beta out of (0, 1)");
        if (!(alpha_bar[t] < alpha_bar[t - 1]))
            throw std::invalid_argument("NoiseSchedule: alpha_bar must strictly decrease");
        if (!(alpha_bar[t] > 0.0))
            throw std::invalid_argument("NoiseSchedule: alpha_bar must stay positive");
    }
    if (!(alpha_bar[T] < 0.05))
        throw std::invalid_argument("NoiseSchedule: terminal alpha_bar must be < 0.05");
}

NoiseSchedule build_schedule(int T, ScheduleKind kind) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(T + 1, 0.0);
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    if (kind == ScheduleKind::cosine) {
        const double shift = 0.008;
        auto f = [&](double t) {
            const double c = std::cos((t / T + shift) / (1.0 + shift) * M_PI / 2.0);
            return c * c;
        };
        const double f0 = f(0.0);
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double cur = f(static_cast<double>(t)) / f0;
            s.beta[t] = std::min(1.0 - cur / prev, kBetaMax);
            prev = cur;
        }
    } else {
        // beta endpoints follow the T = 1000 reference range, rescaled by 1000/T.
        const double scale = 1000.0 / T;
        const double lo = scale * 1e-4, hi = scale * 0.02;
        for (int t = 1; t <= T; ++t) {
            const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
            s.beta[t] = std::min(lo + (hi - lo) * frac, kBetaMax);
        }
    }
    for (int t = 1; t <= T; ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    s.validate();
    return s;
}

DiffusedBox q_sample(const DiffusedBox& x0, int t, const DiffusedBox& eps,
                     const NoiseSchedule& s) {
    check_step(s, t, 0);
    const double ab = s.alpha_bar[t];
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    DiffusedBox out;
    for (int i = 0; i < 6; ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

DiffusedBox ddim_step(const DiffusedBox& x_t, const DiffusedBox& x0_hat, int t,
                      int t_prev, double sigma_t, const DiffusedBox& eps_t,
                      const NoiseSchedule& s) {
    check_step(s, t, 1);
    check_step(s, t_prev, 0);
    if (t_prev >= t) throw std::invalid_argument("ddim_step: t_prev must be < t");
    if (sigma_t < 0) throw std::invalid_argument("ddim_step: sigma must be >= 0");
    const double ab_t = s.alpha_bar[t], ab_p = s.alpha_bar[t_prev];
    const double dir_sq = 1.0 - ab_p - sigma_t * sigma_t;
    if (dir_sq < 0) throw std::invalid_argument("ddim_step: sigma too large");
    const double sq_ab_t = std::sqrt(ab_t), sq_ab_p = std::sqrt(ab_p);
    const double inv_noise = 1.0 / std::sqrt(1.0 - ab_t);
    const double dir = std::sqrt(dir_sq);
    DiffusedBox out;
    for (int i = 0; i < 6; ++i) {
        const double eps_hat = (x_t[i] - sq_ab_t * x0_hat[i]) * inv_noise;
        out[i] = sq_ab_p * x0_hat[i] + dir * eps_hat + sigma_t * eps_t[i];
    }
    return out;
}

DiffusedBox ddpm_step(const DiffusedBox& x_t, const DiffusedBox& eps_hat, int t,
                      double sigma_t, const DiffusedBox& eps_t, const NoiseSchedule& s) {
    check_step(s, t, 1);
    if (sigma_t < 0) throw std::invalid_argument("ddpm_step: sigma must be >= 0");
    const double coeff = s.beta[t] / std::sqrt(1.0 - s.alpha_bar[t]);
    const double inv_sq_a = 1.0 / std::sqrt(s.alpha[t]);
    DiffusedBox out;
    for (int i = 0; i < 6; ++i)
        out[i] = (x_t[i] - coeff * eps_hat[i]) * inv_sq_a + sigma_t * eps_t[i];
    return out;
}

double ddim_sigma(const NoiseSchedule& s, int t, int t_prev, double eta) {
    check_step(s, t, 1);
    check_step(s, t_prev, 0);
    if (t_prev >= t) throw std::invalid_argument("ddim_sigma: t_prev must be < t");
    if (eta == 0.0) return 0.0;
    const double ab_t = s.alpha_bar[t], ab_p = s.alpha_bar[t_prev];
    return eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
}

std::vector<int> tau_subsequence(int T, int S) {
    if (S < 1 || S > T) throw std::invalid_argument("tau_subsequence: need 1 <= S <= T");
    std::vector<int> tau(S);
    for (int i = 1; i <= S; ++i) {
        // round(i * T / S) in exact integer arithmetic
        const long long num = static_cast<long long>(i) * T;
        tau[i - 1] = static_cast<int>((2 * num + S) / (2LL * S));
    }
    return tau;
}

std::vector<double> timestep_embedding(int t, int dim) {
    if (dim < 2 || dim % 2 != 0)
        throw std::invalid_argument("timestep_embedding: dim must be even and >= 2");
    const int half = dim / 2;
    std::vector<double> out(dim);
    for (int i = 0; i < half; ++i) {
        const double exponent = half > 1 ? static_cast<double>(i) / (half - 1) : 0.0;
        const double freq = std::pow(10000.0, -exponent);
        const double arg = t * freq;
        out[2 * i] = std::sin(arg);
        out[2 * i + 1] = std::cos(arg);
    }
    return out;
}

void save_schedule_csv(const NoiseSchedule& s, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "w"));
    if (!f) throw std::runtime_error("save_schedule_csv: cannot open " + path);
    std::fprintf(f.get(), "t,beta,alpha,alpha_bar\n");
    for (int t = 0; t <= s.T; ++t)
        std::fprintf(f.get(), "%d,%.17g,%.17g,%.17g\n", t, s.beta[t], s.alpha[t],
                     s.alpha_bar[t]);
}

NoiseSchedule load_schedule_csv(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "r"));
    if (!f) throw std::runtime_error("load_schedule_csv: cannot open " + path);
    char header[256];
    if (!std::fgets(header, sizeof header, f.get()))
        throw std::runtime_error("load_schedule_csv: empty file " + path);
    NoiseSchedule s;
    int t = 0;
    double beta = 0, alpha = 0, alpha_bar = 0;
    while (std::fscanf(f.get(), "%d,%lf,%lf,%lf", &t, &beta, &alpha, &alpha_bar) == 4) {
        if (t != static_cast<int>(s.beta.size()))
            throw std::runtime_error("load_schedule_csv: non-contiguous steps in " + path);
        s.beta.push_back(beta);
        s.alpha.push_back(alpha);
        s.alpha_bar.push_back(alpha_bar);
    }
    if (s.beta.size() < 2)
        throw std::runtime_error("load_schedule_csv: no steps in " + path);
    s.T = static_cast<int>(s.beta.size()) - 1;
    s.validate();
    return s;
}

}  // namespace rexo
