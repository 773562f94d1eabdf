#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "epsrecon/adaptive.hpp"
#include "epsrecon/data_pipeline.hpp"

namespace epsrecon {

inline constexpr const char* kVersion = "0.1.0";

struct TimeSettings {
  double t_final = 1.2;
  double dt = 0.003;

  bool operator==(const TimeSettings&) const = default;
};

struct PipelineSettings {
  double beta = 0.5;
  /// Cut-off width as a fraction of T.
  double delta = 0.1;
  double noise_level = 0.0;
  /// Height of the measured plane when it differs from Gamma.
  std::optional<double> data_plane_z;

  bool operator==(const PipelineSettings&) const = default;
};

/// Box inclusion in a unit background, the truth written by `synthesize`.
struct TwinSettings {
  Box inclusion{{-0.08, -0.08, -0.06}, {0.08, 0.08, 0.0}};
  double inclusion_eps = 4.0;
  double glob_sigma = 0.03;

  bool operator==(const TwinSettings&) const = default;
};

struct PathSettings {
  std::string eps;       ///< coefficient for forward / report
  std::string eps_true;  ///< truth for report
  std::string eps_glob;
  std::string data;      ///< measurement plane text
  std::string record;    ///< complemented boundary data for invert
  std::string out = "out";

  bool operator==(const PathSettings&) const = default;
};

struct RunConfig {
  DomainSpec domain = DomainSpec::standard();
  double base_h = 0.02;
  double omega = 30.0;
  TimeSettings time;
  double s = 1.0;
  double gamma = 0.01;
  /// Includes the CG settings, written as their own "cg" section.
  AdaptiveConfig adaptive;
  PipelineSettings pipeline;
  TwinSettings twin;
  PathSettings paths;
  /// Samples of the forward field written as VTK snapshots.
  std::vector<int> snapshots{100, 200, 300};
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError (or GeometryError) on inconsistent settings.
  void validate() const;

  SourceWaveform waveform() const { return SourceWaveform{omega}; }
  ForwardConfig forward() const;
  CutoffZdelta cutoff() const { return CutoffZdelta::make(time.t_final, pipeline.delta); }

  std::string to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  bool operator==(const RunConfig&) const = default;
};

/// FNV-1a 64 of a byte string, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Manifest written next to every run output.
struct Manifest {
  std::string command;
  std::string config_hash;
  std::string stop_reason;
  int threads = 1;
  std::vector<std::string> outputs;

  std::string to_json() const;
};

}  // namespace epsrecon
