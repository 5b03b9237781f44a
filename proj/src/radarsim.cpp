#include "rexo/radarsim.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace rexo {

namespace {

std::mutex g_fftw_mutex;  // FFTW planning is not thread-safe

int next_pow2(int n) {
    int p = 1;
    while (p < n) p *= 2;
    return p;
}

int pad_size(int n) { return next_pow2(4 * n); }

// In-plane coordinates seen by one array: lateral offset a and depth d.
void view_plane(const Scatterer& s, View array, double& a, double& d) {
    a = array == View::horizontal ? s.x : s.y;
    d = s.z;
}

}  // namespace

void RadarArrayConfig::validate() const {
    if (n_adc < 2 || n_pulse < 2 || n_elem < 2)
        throw std::invalid_argument("RadarArrayConfig: counts must be >= 2");
    if (!(max_range > 0))
        throw std::invalid_argument("RadarArrayConfig: max_range must be positive");
    if (!(spacing > 0) || !(fov_deg > 0) || fov_deg > 180.0)
        throw std::invalid_argument("RadarArrayConfig: bad spacing or field of view");
}

Cube synthesize_cube(const std::vector<Scatterer>& scene, const RadarArrayConfig& cfg,
                     View array) {
    cfg.validate();
    Cube cube;
    cube.n_adc = cfg.n_adc;
    cube.n_pulse = cfg.n_pulse;
    cube.n_elem = cfg.n_elem;
    cube.data.assign(static_cast<size_t>(cfg.n_adc) * cfg.n_pulse * cfg.n_elem, {0, 0});
    for (const Scatterer& s : scene) {
        if (s.reflectivity < 0)
            throw std::invalid_argument("synthesize_cube: negative reflectivity");
        double a, d;
        view_plane(s, array, a, d);
        const double r = std::hypot(a, d);
        if (r >= cfg.max_range) {
            ++cube.n_excluded;
            continue;
        }
        if (s.reflectivity == 0) continue;
        const double u = r > 0 ? a / r : 0.0;  // sin of the off-boresight angle
        const double f_range = r / cfg.max_range;
        for (int n = 0; n < cfg.n_adc; ++n) {
            const std::complex<double> range_ph =
                std::polar(s.reflectivity, 2.0 * M_PI * f_range * n);
            for (int k = 0; k < cfg.n_elem; ++k) {
                const std::complex<double> v =
                    range_ph * std::polar(1.0, M_PI * cfg.spacing * u * k);
                for (int m = 0; m < cfg.n_pulse; ++m) cube.at(n, m, k) += v;
            }
        }
    }
    return cube;
}

Tensor cube_to_polar(const Cube& cube, [[maybe_unused]] const RadarArrayConfig& cfg) {
    const int nr = pad_size(cube.n_adc);
    const int nd = cube.n_pulse;
    const int nu = pad_size(cube.n_elem);
    const size_t total = static_cast<size_t>(nr) * nd * nu;

    fftw_complex* buf;
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        buf = fftw_alloc_complex(total);
        plan = fftw_plan_dft_3d(nr, nd, nu, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    if (!buf || !plan) throw std::runtime_error("cube_to_polar: FFTW setup failed");
    for (size_t i = 0; i < total; ++i) buf[i][0] = buf[i][1] = 0.0;
    for (int n = 0; n < cube.n_adc; ++n)
        for (int m = 0; m < cube.n_pulse; ++m)
            for (int k = 0; k < cube.n_elem; ++k) {
                const std::complex<double>& v =
                    cube.data[(static_cast<size_t>(n) * cube.n_pulse + m) * cube.n_elem + k];
                fftw_complex& dst = buf[(static_cast<size_t>(n) * nd + m) * nu + k];
                dst[0] = v.real();
                dst[1] = v.imag();
            }
    fftw_execute(plan);

    const double norm =
        static_cast<double>(cube.n_adc) * cube.n_pulse * cube.n_elem;
    Tensor polar(Tensor::shape(nr, nu));
    for (int ir = 0; ir < nr; ++ir)
        for (int m = 0; m < nd; ++m)
            for (int j = 0; j < nu; ++j) {
                // fftshift along the angle axis: output column j holds
                // frequency index j - nu/2.
                const int k = (j - nu / 2 + nu) % nu;
                const fftw_complex& v = buf[(static_cast<size_t>(ir) * nd + m) * nu + k];
                polar.at(ir, j) +=
                    static_cast<float>(std::hypot(v[0], v[1]) / norm);
            }

    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(plan);
        fftw_free(buf);
    }
    return polar;
}

Tensor polar_to_cartesian(const Tensor& polar, const RadarArrayConfig& cfg,
                          const GridSpec& grid) {
    const int nr = static_cast<int>(polar.dims()[0]);
    const int nu = static_cast<int>(polar.dims()[1]);
    const double dr = cfg.max_range / nr;
    const double du = 2.0 / (nu * cfg.spacing);
    const double u_fov = std::sin(cfg.fov_deg * M_PI / 360.0);
    Tensor cart(Tensor::shape(grid.n_a, grid.n_d));
    for (int ia = 0; ia < grid.n_a; ++ia) {
        const double a = grid.center_a(ia);
        for (int id = 0; id < grid.n_d; ++id) {
            const double d = grid.center_d(id);
            const double r = std::hypot(a, d);
            if (r < dr || r >= cfg.max_range) continue;
            const double u = a / r;
            if (std::abs(u) > u_fov || d <= 0) continue;
            const double pr = r / dr;
            const double pu = u / du + nu / 2.0;
            const int ir0 = static_cast<int>(std::floor(pr));
            const int iu0 = static_cast<int>(std::floor(pu));
            const double fr = pr - ir0, fu = pu - iu0;
            double acc = 0.0;
            for (int er = 0; er < 2; ++er)
                for (int eu = 0; eu < 2; ++eu) {
                    const int ir = ir0 + er, iu = iu0 + eu;
                    if (ir < 0 || ir >= nr || iu < 0 || iu >= nu) continue;
                    const double w = (er ? fr : 1.0 - fr) * (eu ? fu : 1.0 - fu);
                    acc += w * polar.at(ir, iu);
                }
            // Polar bin mass spreads over Cartesian area (r / cos theta) dr du.
            const double cos_theta = d / r;
            cart.at(ia, id) = static_cast<float>(
                acc * grid.res_a * grid.res_d * cos_theta / (r * dr * du));
        }
    }
    return cart;
}

namespace {

Tensor stack_frames(const Tensor& frame, int M) {
    const size_t na = frame.dims()[0], nd = frame.dims()[1];
    Tensor out(Tensor::shape(M, na, nd));
    for (int m = 0; m < M; ++m)
        for (size_t i = 0; i < na; ++i)
            for (size_t j = 0; j < nd; ++j) out.at(m, i, j) = frame.at(i, j);
    return out;
}

}  // namespace

RadarFrameSet render_scene(const std::vector<Scatterer>& scene,
                           const RadarArrayConfig& cfg, int M, const GridSpec& grid) {
    if (M < 1) throw std::invalid_argument("render_scene: M must be >= 1");
    RadarFrameSet out;
    out.grid = grid;
    for (View v : {View::horizontal, View::vertical}) {
        Tensor cart = polar_to_cartesian(cube_to_polar(synthesize_cube(scene, cfg, v), cfg),
                                         cfg, grid);
        for (size_t i = 0; i < cart.size(); ++i)
            cart.data()[i] = std::log1p(cart.data()[i]);
        (v == View::horizontal ? out.hor : out.ver) = stack_frames(cart, M);
    }
    return out;
}

RadarFrameSet blob_heatmap(const std::vector<Scatterer>& scene, int M,
                           double sigma_blob, const GridSpec& grid) {
    if (M < 1) throw std::invalid_argument("blob_heatmap: M must be >= 1");
    if (!(sigma_blob > 0))
        throw std::invalid_argument("blob_heatmap: sigma_blob must be positive");
    RadarFrameSet out;
    out.grid = grid;
    const double radius = 4.0 * sigma_blob;
    const double inv2s2 = 1.0 / (2.0 * sigma_blob * sigma_blob);
    for (View v : {View::horizontal, View::vertical}) {
        Tensor frame(Tensor::shape(grid.n_a, grid.n_d));
        for (const Scatterer& s : scene) {
            if (s.reflectivity < 0)
                throw std::invalid_argument("blob_heatmap: negative reflectivity");
            double a, d;
            view_plane(s, v, a, d);
            const int ia_lo = std::max(
                0, static_cast<int>(std::floor((a - radius - grid.origin_a) / grid.res_a)));
            const int ia_hi = std::min(
                grid.n_a - 1,
                static_cast<int>(std::ceil((a + radius - grid.origin_a) / grid.res_a)));
            const int id_lo = std::max(
                0, static_cast<int>(std::floor((d - radius - grid.origin_d) / grid.res_d)));
            const int id_hi = std::min(
                grid.n_d - 1,
                static_cast<int>(std::ceil((d + radius - grid.origin_d) / grid.res_d)));
            for (int ia = ia_lo; ia <= ia_hi; ++ia)
                for (int id = id_lo; id <= id_hi; ++id) {
                    const double da = grid.center_a(ia) - a;
                    const double dd = grid.center_d(id) - d;
                    frame.at(ia, id) += static_cast<float>(
                        s.reflectivity * std::exp(-(da * da + dd * dd) * inv2s2));
                }
        }
        (v == View::horizontal ? out.hor : out.ver) = stack_frames(frame, M);
    }
    return out;
}

}  // namespace rexo
