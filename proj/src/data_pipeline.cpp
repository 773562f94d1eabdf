#include "epsrecon/data_pipeline.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "epsrecon/errors.hpp"

namespace epsrecon {

MeasurementPlaneData MeasurementPlaneData::zeros(int nx, int ny, int nt, double x0, double y0, double pitch,
                                                 double dt, double plane_z) {
  MeasurementPlaneData d;
  d.nx = nx;
  d.ny = ny;
  d.nt = nt;
  d.x0 = x0;
  d.y0 = y0;
  d.pitch = pitch;
  d.dt = dt;
  d.plane_z = plane_z;
  d.samples.assign(static_cast<std::size_t>(nx) * ny * nt, 0.0);
  return d;
}

double MeasurementPlaneData::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : samples) m = std::max(m, v);
  return m;
}

void MeasurementPlaneData::validate() const {
  if (nx < 1 || ny < 1 || nt < 1) throw ShapeError("empty detector grid");
  if (!(pitch > 0.0) || !(dt > 0.0)) throw ShapeError("detector pitch and time step must be positive");
  if (samples.size() != static_cast<std::size_t>(nx) * ny * nt) throw ShapeError("sample count does not match the grid");
  for (double v : samples)
    if (!std::isfinite(v)) throw ShapeError("non-finite sample");
}

void ImmersingConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("immersing beta must lie in (0, 1)");
}

namespace {

int grid_count(double lo, double hi, double pitch) {
  const double n = (hi - lo) / pitch;
  const long r = std::lround(n);
  if (r < 0 || std::abs(n - r) > 1e-6) throw GeometryError("extent is not a multiple of the detector pitch");
  return static_cast<int>(r) + 1;
}

/// Grid index of coordinate x, or -1 when it is off the grid.
int grid_index(double x, double lo, double pitch, int n) {
  const double f = (x - lo) / pitch;
  const long r = std::lround(f);
  if (std::abs(f - r) > 1e-6 || r < 0 || r >= n) return -1;
  return static_cast<int>(r);
}

bool on_plane(double z, double plane) { return std::abs(z - plane) <= 1e-9 * std::max(1.0, std::abs(plane)); }

}  // namespace

MeasurementPlaneData plane_from_record(const BoundaryRecord& record, double z, int component, double xlo,
                                       double xhi, double ylo, double yhi, double pitch) {
  if (!record.has_dirichlet()) throw ShapeError("record carries no Dirichlet data");
  if (component < 0 || component > 2) throw ShapeError("component index out of range");
  const TimeGrid& grid = record.time_grid();
  auto out = MeasurementPlaneData::zeros(grid_count(xlo, xhi, pitch), grid_count(ylo, yhi, pitch), grid.n_samples(),
                                         xlo, ylo, pitch, grid.dt, z);
  std::vector<std::uint8_t> filled(static_cast<std::size_t>(out.nx) * out.ny, 0);
  for (int i = 0; i < record.n_nodes(); ++i) {
    const Vec3 p = record.node_position(i);
    if (!on_plane(p[2], z)) continue;
    const int ix = grid_index(p[0], xlo, pitch, out.nx);
    const int iy = grid_index(p[1], ylo, pitch, out.ny);
    if (ix < 0 || iy < 0) continue;
    for (int n = 0; n < out.nt; ++n) out.at(ix, iy, n) = record.dirichlet(i, n)[component];
    filled[static_cast<std::size_t>(ix) * out.ny + iy] = 1;
  }
  if (std::find(filled.begin(), filled.end(), 0) != filled.end())
    throw ShapeError("record does not cover the detector grid");
  return out;
}

MeasurementPlaneData gamma_plane(const DomainSpec& spec, const BoundaryRecord& record) {
  const Box& o = spec.omega_bounds;
  return plane_from_record(record, spec.gamma_z, 1, o.lo[0], o.hi[0], o.lo[1], o.hi[1], record.base_h());
}

MeasurementPlaneData gamma1_plane(const DomainSpec& spec, const BoundaryRecord& record) {
  const Box& g = spec.g_bounds;
  return plane_from_record(record, spec.gamma_z, 1, g.lo[0], g.hi[0], g.lo[1], g.hi[1], record.base_h());
}

MeasurementPlaneData synthesize_twin_data(const DomainSpec& spec, const CoefficientField& eps_true,
                                          const ForwardConfig& config, const SourceWaveform& waveform,
                                          double noise_level, std::uint64_t seed) {
  if (!(noise_level >= 0.0)) throw ConfigError("noise level must be non-negative");
  const auto run = solve_forward_G(spec, eps_true, config, waveform);
  auto data = gamma_plane(spec, run.record);
  if (noise_level > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : data.samples) v *= 1.0 + noise_level * u(rng);
  }
  return data;
}

CoefficientField gaussian_smooth(const CoefficientField& eps, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("smoothing width must be positive");
  const Mesh& mesh = *eps.mesh;
  std::vector<int> omega;
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (mesh.cell_in_omega(c)) omega.push_back(c);
  CoefficientField out = eps;
  // Slack keeps lattice points exactly at the reach on the inside.
  const double reach2 = 16.0 * sigma * sigma * (1.0 + 1e-9);
  for (int c : omega) {
    const Vec3 x = mesh.cell_center(c);
    double num = 0.0, den = 0.0;
    for (int k : omega) {
      const Vec3 y = mesh.cell_center(k);
      const double r2 = (x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]) + (x[2] - y[2]) * (x[2] - y[2]);
      if (r2 > reach2) continue;
      const double w = mesh.cell_volume(k) * std::exp(-r2 / (2.0 * sigma * sigma));
      num += w * eps.values[k];
      den += w;
    }
    out.values[c] = std::clamp(num / den, kEpsMin, kEpsMax);
  }
  return out;
}

namespace {

/// Signed angular frequency of FFT bin k out of n with spacing d.
double bin_frequency(int k, int n, double d) {
  const int m = k <= n / 2 ? k : k - n;
  return 2.0 * std::numbers::pi * m / (n * d);
}

bool is_nyquist(int k, int n) { return n % 2 == 0 && k == n / 2; }

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* ptr;
};

}  // namespace

MeasurementPlaneData propagate_data(const MeasurementPlaneData& data, double target_z, bool pad_time) {
  data.validate();
  const int nx = data.nx, ny = data.ny, nt = pad_time ? 2 * data.nt : data.nt;
  const std::size_t total = static_cast<std::size_t>(nx) * ny * nt;
  FftwBuffer buf(total);
  auto* c = reinterpret_cast<std::complex<double>*>(buf.ptr);
  std::fill(c, c + total, std::complex<double>(0.0, 0.0));
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      for (int it = 0; it < data.nt; ++it) c[(static_cast<std::size_t>(ix) * ny + iy) * nt + it] = data.at(ix, iy, it);

  fftw_plan fwd = fftw_plan_dft_3d(nx, ny, nt, buf.ptr, buf.ptr, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_3d(nx, ny, nt, buf.ptr, buf.ptr, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(fwd);

  const double dz = target_z - data.plane_z;
  for (int ix = 0; ix < nx; ++ix) {
    const double kx = bin_frequency(ix, nx, data.pitch);
    for (int iy = 0; iy < ny; ++iy) {
      const double ky = bin_frequency(iy, ny, data.pitch);
      for (int it = 0; it < nt; ++it) {
        auto& v = c[(static_cast<std::size_t>(ix) * ny + iy) * nt + it];
        const double w = bin_frequency(it, nt, data.dt);
        const double arg = w * w - kx * kx - ky * ky;
        if (!(arg > 0.0) || is_nyquist(ix, nx) || is_nyquist(iy, ny) || is_nyquist(it, nt)) {
          v = 0.0;
          continue;
        }
        const double kz = std::copysign(std::sqrt(arg), w);
        v *= std::polar(1.0, -kz * dz);
      }
    }
  }
  fftw_execute(inv);
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);

  MeasurementPlaneData out = data;
  out.plane_z = target_z;
  const double scale = 1.0 / static_cast<double>(total);
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      for (int it = 0; it < data.nt; ++it)
        out.at(ix, iy, it) = c[(static_cast<std::size_t>(ix) * ny + iy) * nt + it].real() * scale;
  return out;
}

double calibration_factor(const MeasurementPlaneData& data, const MeasurementPlaneData& simulated) {
  data.validate();
  simulated.validate();
  const double gmax = data.max_value();
  if (!(gmax > 0.0)) throw CalibrationError("maximum of the measured data is not positive");
  return simulated.max_value() / gmax;
}

MeasurementPlaneData calibrate(const MeasurementPlaneData& data, const MeasurementPlaneData& simulated) {
  data.validate();
  simulated.validate();
  const double gmax = data.max_value();
  if (!(gmax > 0.0)) throw CalibrationError("maximum of the measured data is not positive");
  const double e2max = simulated.max_value();
  MeasurementPlaneData out = data;
  for (double& v : out.samples) v = e2max * static_cast<double>(static_cast<float>(v / gmax));
  return out;
}

MeasurementPlaneData immerse(const MeasurementPlaneData& g_incl, const MeasurementPlaneData& simulated_gamma1,
                             const ImmersingConfig& cfg) {
  cfg.validate();
  g_incl.validate();
  simulated_gamma1.validate();
  const auto& s = simulated_gamma1;
  if (g_incl.nt != s.nt || std::abs(g_incl.dt - s.dt) > 1e-12 * s.dt || std::abs(g_incl.pitch - s.pitch) > 1e-12 * s.pitch ||
      !on_plane(g_incl.plane_z, s.plane_z))
    throw ShapeError("measured and simulated grids are not aligned");
  const int ox = grid_index(g_incl.x0, s.x0, s.pitch, s.nx);
  const int oy = grid_index(g_incl.y0, s.y0, s.pitch, s.ny);
  if (ox < 0 || oy < 0 || ox + g_incl.nx > s.nx || oy + g_incl.ny > s.ny)
    throw ShapeError("measured grid does not lie on the simulated grid");

  std::vector<double> tmax(g_incl.nt, -std::numeric_limits<double>::infinity());
  for (int ix = 0; ix < g_incl.nx; ++ix)
    for (int iy = 0; iy < g_incl.ny; ++iy)
      for (int it = 0; it < g_incl.nt; ++it) tmax[it] = std::max(tmax[it], g_incl.at(ix, iy, it));

  MeasurementPlaneData out = s;
  for (int ix = 0; ix < g_incl.nx; ++ix)
    for (int iy = 0; iy < g_incl.ny; ++iy)
      for (int it = 0; it < g_incl.nt; ++it) {
        const double g = g_incl.at(ix, iy, it);
        if (g >= cfg.beta * tmax[it]) out.at(ox + ix, oy + iy, it) = g;
      }
  return out;
}

BoundaryRecord complement_boundary_data(const BoundaryRecord& glob_record, const MeasurementPlaneData& immersed) {
  immersed.validate();
  if (!glob_record.has_dirichlet() || !glob_record.has_neumann())
    throw ShapeError("eps_glob record must carry Dirichlet and Neumann data");
  const TimeGrid& grid = glob_record.time_grid();
  if (immersed.nt != grid.n_samples() || std::abs(immersed.dt - grid.dt) > 1e-12 * grid.dt)
    throw ShapeError("immersed field and record use different time grids");
  const double top = glob_record.box().hi[2];
  if (!on_plane(immersed.plane_z, top)) throw ShapeError("immersed field is not on the top face of G_b");
  BoundaryRecord out = glob_record;
  for (int i = 0; i < out.n_nodes(); ++i) {
    const Vec3 p = out.node_position(i);
    if (!on_plane(p[2], top)) continue;
    const int ix = grid_index(p[0], immersed.x0, immersed.pitch, immersed.nx);
    const int iy = grid_index(p[1], immersed.y0, immersed.pitch, immersed.ny);
    if (ix < 0 || iy < 0) throw ShapeError("top-face node is not covered by the immersed field");
    for (int n = 0; n < immersed.nt; ++n) out.dirichlet(i, n)[1] = immersed.at(ix, iy, n);
  }
  return out;
}

BoundaryRecord complement_boundary_data(const DomainSpec& spec, const CoefficientField& eps_glob,
                                        const ForwardConfig& config, const SourceWaveform& waveform,
                                        const MeasurementPlaneData& immersed) {
  return complement_boundary_data(solve_forward_G(spec, eps_glob, config, waveform).record, immersed);
}

}  // namespace epsrecon
