#pragma once

#include <complex>
#include <vector>

#include "rexo/geometry.hpp"
#include "rexo/tensor.hpp"

namespace rexo {

struct Scatterer {
    double x = 0, y = 0, z = 0;
    double reflectivity = 1.0;
};

struct RadarArrayConfig {
    int n_adc = 128;    // fast-time samples per pulse
    int n_pulse = 4;    // pulses per frame (Doppler axis)
    int n_elem = 86;    // array elements
    double max_range = 14.72;  // meters; beat frequency maps r -> r/max_range cycles/sample
    double spacing = 1.0;      // element spacing in half-wavelength units
    double fov_deg = 120.0;    // full field of view about boresight
    void validate() const;
};

// Cartesian heatmap grid shared by both views: axis a is lateral (x) on the
// horizontal view and height (y) on the vertical view; axis d is depth (z).
struct GridSpec {
    double origin_a = -6.4;
    double res_a = 0.05;
    int n_a = 256;
    double origin_d = 0.0;
    double res_d = 0.1;
    int n_d = 128;
    double center_a(int ia) const { return origin_a + (ia + 0.5) * res_a; }
    double center_d(int id) const { return origin_d + (id + 0.5) * res_d; }
};

inline constexpr GridSpec kDefaultGrid{};

// M stacked frames per view, shape (M, n_a, n_d).
struct RadarFrameSet {
    Tensor hor;
    Tensor ver;
    GridSpec grid;
    int frames() const { return static_cast<int>(hor.dims()[0]); }
};

// Idealized ADC cube, row-major (n_adc, n_pulse, n_elem).
struct Cube {
    std::vector<std::complex<double>> data;
    int n_adc = 0, n_pulse = 0, n_elem = 0;
    int n_excluded = 0;  // scatterers dropped for exceeding max_range
    std::complex<double>& at(int n, int m, int k) {
        return data[(static_cast<size_t>(n) * n_pulse + m) * n_elem + k];
    }
};

Cube synthesize_cube(const std::vector<Scatterer>& scene, const RadarArrayConfig& cfg,
                     View array);

// 3D FFT (range and angle axes zero-padded), magnitude summed over Doppler.
// Output rank-2 (range bins, angle bins); angle bins span sin-space [-1, 1).
Tensor cube_to_polar(const Cube& cube, const RadarArrayConfig& cfg);

// Bilinear polar -> Cartesian resample with the polar-area Jacobian weight so
// total mass is preserved; out-of-FOV and out-of-range cells are zero.
Tensor polar_to_cartesian(const Tensor& polar, const RadarArrayConfig& cfg,
                          const GridSpec& grid);

// Full chain per view, log(1 + x) scaled; static scenes replicate one render
// across the M stacked frames.
RadarFrameSet render_scene(const std::vector<Scatterer>& scene,
                           const RadarArrayConfig& cfg, int M,
                           const GridSpec& grid = kDefaultGrid);

// Fast fixture path: isotropic Gaussian bump per scatterer on each view plane,
// peak amplitude equal to reflectivity, no log scaling.
RadarFrameSet blob_heatmap(const std::vector<Scatterer>& scene, int M,
                           double sigma_blob, const GridSpec& grid = kDefaultGrid);

}  // namespace rexo
