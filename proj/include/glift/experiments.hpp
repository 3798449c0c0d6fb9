#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glift/solver.hpp"

namespace glift {

enum class ExperimentKind { phase_lambda, phase_nk, phase_nj, error_lambda, error_j };

std::string to_string(ExperimentKind kind);
/// Accepts the CLI subcommand names (phase-lambda, ...).
ExperimentKind parse_experiment_kind(const std::string& name);

/// Recognized grid parameters: N, M, K, J (integers), sigma, k (lambda = k * gamma_0),
/// gamma (target gamma_0 / min ||x0_j||, 0 disables rescaling) and lambda
/// (explicit regularization, overrides k).
struct Axis {
  std::string name;
  std::vector<double> values;
};

struct GridSpec {
  Axis x_axis;
  std::optional<Axis> y_axis;
  std::map<std::string, double> fixed;
  long trials = 20;
  std::uint64_t base_seed = 1;

  void validate() const;
  std::size_t point_count() const;
};

/// Desk-scale defaults (5 x 5 grids, 20 trials) or the published protocol
/// (50 trials for phase plots, 100 for error plots, finer grids).
GridSpec default_grid(ExperimentKind kind, bool paper_scale = false);

struct ExperimentRecord {
  std::vector<std::pair<std::string, double>> point;
  long success_count = 0;
  long trial_count = 0;
  /// Statistics of the error metric over exact-recovery trials only.
  std::optional<double> mean_error;
  std::optional<double> std_error;
  double runtime_ms = 0.0;

  double success_rate() const {
    return trial_count > 0 ? static_cast<double>(success_count) / static_cast<double>(trial_count)
                           : 0.0;
  }
  double value(const std::string& name) const;
};

struct ExperimentTable {
  ExperimentKind kind = ExperimentKind::phase_lambda;
  /// "l2inf" (||Xhat - X0||_{2,inf}) or "l2inf_sq" (its square).
  std::string metric = "l2inf";
  std::vector<std::string> axis_names;
  std::vector<ExperimentRecord> records;
  /// Axis lengths, x first.
  std::vector<std::size_t> axis_lengths;
};

struct RunOptions {
  int workers = 1;
  SolverOptions solver;
  double support_threshold = 1e-4;
  bool progress = false;
};

/// Runs every (grid point, trial) pair. Trial t of every grid point draws its
/// instance from Philox stream t under key base_seed, so tables depend only on
/// (spec, base_seed) and never on the worker count or completion order.
ExperimentTable run_experiment(ExperimentKind kind, const GridSpec& spec,
                               const RunOptions& opts = {});

/// Axes (k, gamma); exact-support recovery rate per point.
ExperimentTable run_lambda_gamma_phase(const GridSpec& spec, const RunOptions& opts = {});
/// Axes (N, K) with J fixed.
ExperimentTable run_n_vs_k_phase(const GridSpec& spec, const RunOptions& opts = {});
/// Axes (N, J) with K fixed.
ExperimentTable run_n_vs_j_phase(const GridSpec& spec, const RunOptions& opts = {});
/// Axis k (or lambda); conditional mean/std of ||Xhat - X0||_{2,inf}.
ExperimentTable run_error_vs_lambda(const GridSpec& spec, const RunOptions& opts = {});
/// Axis J; conditional mean/std of ||Xhat - X0||_{2,inf}^2.
ExperimentTable run_error_vs_j(const GridSpec& spec, const RunOptions& opts = {});

// --- analysis ---------------------------------------------------------------

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. Needs >= 2 distinct x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct BoundaryPoint {
  double across = 0.0;
  /// Interpolated value of `along` where the rate first reaches 50%; empty
  /// when the rate never crosses or is already >= 50% at the first point.
  std::optional<double> crossing;
  /// Rate never drops by more than the slack between consecutive points.
  bool monotone = true;
};

/// 50% crossings of the success rate along axis `along` for each value of
/// `across`. `slack` is the tolerated one-step decrease.
std::vector<BoundaryPoint> phase_boundary(const ExperimentTable& table, const std::string& along,
                                          const std::string& across, double slack);

/// Linear fit of the crossings that exist; r2 = 0 with fewer than two.
LinearFit fit_boundary(const std::vector<BoundaryPoint>& boundary);

/// Linear fit of mean_error against the x axis over points that have one.
LinearFit fit_mean_error(const ExperimentTable& table);

/// Columns: <across>,crossing,monotone; crossing empty when absent.
std::string boundary_to_csv(const std::vector<BoundaryPoint>& boundary, const std::string& across);

// --- reporting ---------------------------------------------------------------

/// CSV text: header row, one row per grid point, RFC-4180 quoting.
/// Columns: <axis names...>,trials,successes,success_rate,metric,mean_error,std_error
std::string table_to_csv(const ExperimentTable& table);
ExperimentTable table_from_csv(const std::string& text);

/// Per-point wall time, kept out of the main CSV so that file is reproducible.
std::string timing_to_csv(const ExperimentTable& table);

enum class ReportFormat { csv, plot, both };
ReportFormat parse_report_format(const std::string& name);

/// Writes <dir>/<stem>.csv and <stem>_timing.csv, and for plot formats a
/// heatmap <stem>.pgm (one pixel per grid cell) for two-axis tables or a
/// mean +- std line chart <stem>.ppm for one-axis tables. Returns the paths.
std::vector<std::string> emit_report(const ExperimentTable& table, ReportFormat format,
                                     const std::string& dir, const std::string& stem);

}  // namespace glift
