#pragma once

#include <cstdint>
#include <vector>

#include "epsrecon/wave_forward.hpp"

namespace epsrecon {

/// Scalar time series on a rectangular detector grid in the plane
/// z = plane_z. Detector (ix, iy) sits at (x0 + ix * pitch, y0 + iy * pitch);
/// sample it at time it * dt. Layout [ix][iy][it].
struct MeasurementPlaneData {
  int nx = 0, ny = 0, nt = 0;
  double x0 = 0.0, y0 = 0.0;
  double pitch = 0.0;
  double dt = 0.0;
  double plane_z = 0.0;
  std::vector<double> samples;

  static MeasurementPlaneData zeros(int nx, int ny, int nt, double x0, double y0, double pitch, double dt,
                                    double plane_z);
  double& at(int ix, int iy, int it) { return samples[(static_cast<std::size_t>(ix) * ny + iy) * nt + it]; }
  double at(int ix, int iy, int it) const { return samples[(static_cast<std::size_t>(ix) * ny + iy) * nt + it]; }
  double max_value() const;
  /// Throws ShapeError on an incomplete grid or non-finite samples.
  void validate() const;
};

struct ImmersingConfig {
  double beta = 0.5;
  void validate() const;
};

/// One component of the Dirichlet part of a record on the plane z, over
/// the detector grid with the given pitch covering [xlo, xhi] x [ylo, yhi].
MeasurementPlaneData plane_from_record(const BoundaryRecord& record, double z, int component, double xlo,
                                       double xhi, double ylo, double yhi, double pitch);
/// E_2 on Gamma (the Omega rectangle at z = c1), detector pitch = base h.
MeasurementPlaneData gamma_plane(const DomainSpec& spec, const BoundaryRecord& record);
/// E_2 on Gamma_1 (the full top face of G_b), detector pitch = base h.
MeasurementPlaneData gamma1_plane(const DomainSpec& spec, const BoundaryRecord& record);

/// Twin data: E_2 of the forward run with eps_true on Gamma, times
/// (1 + noise_level u) with u uniform on [-1, 1] drawn from the seed.
MeasurementPlaneData synthesize_twin_data(const DomainSpec& spec, const CoefficientField& eps_true,
                                          const ForwardConfig& config, const SourceWaveform& waveform,
                                          double noise_level, std::uint64_t seed = 0);

/// Gaussian smoothing of a coefficient over Omega (volume-weighted kernel
/// exp(-r^2 / (2 sigma^2)) between cell centers), 1 outside Omega. Used
/// to build an eps_glob stand-in from a known truth.
CoefficientField gaussian_smooth(const CoefficientField& eps, double sigma);

/// Phase-shift extrapolation to the plane target_z: FFT over (x, y, t),
/// multiply by exp(-i kz (target_z - plane_z)), kz = sign(w) sqrt(w^2 - kx^2 - ky^2),
/// zero the evanescent and Nyquist components, inverse FFT. Wave speed 1.
/// With pad_time the time axis is zero-padded to twice its length so that
/// shifted signals do not wrap around.
MeasurementPlaneData propagate_data(const MeasurementPlaneData& data, double target_z, bool pad_time = true);

/// Calibration factor r = E2_max / g_max, with E2_max the maximum of the
/// simulated field over the plane and all samples.
double calibration_factor(const MeasurementPlaneData& data, const MeasurementPlaneData& simulated);

/// g_incl = E2_max * (g / g_max). The normalized value is rounded to single
/// precision, which makes the result independent of any positive scale
/// applied to the raw data.
MeasurementPlaneData calibrate(const MeasurementPlaneData& data, const MeasurementPlaneData& simulated);

/// Immersed field on Gamma_1: g_incl where the detector lies in Gamma and
/// g_incl >= beta max_Gamma g_incl(., t), the simulated value elsewhere.
MeasurementPlaneData immerse(const MeasurementPlaneData& g_incl, const MeasurementPlaneData& simulated_gamma1,
                             const ImmersingConfig& cfg);

/// Data (g, p) for the inversion: everything from the eps_glob record
/// except E_2 on Gamma_1, which is replaced by the immersed field.
BoundaryRecord complement_boundary_data(const BoundaryRecord& glob_record, const MeasurementPlaneData& immersed);
/// Same, running the eps_glob forward problem first.
BoundaryRecord complement_boundary_data(const DomainSpec& spec, const CoefficientField& eps_glob,
                                        const ForwardConfig& config, const SourceWaveform& waveform,
                                        const MeasurementPlaneData& immersed);

}  // namespace epsrecon
