#include "glift/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "glift/rng.hpp"
#include "glift/synth.hpp"
#include "glift/theory.hpp"

namespace glift {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::phase_lambda: return "phase-lambda";
    case ExperimentKind::phase_nk: return "phase-nk";
    case ExperimentKind::phase_nj: return "phase-nj";
    case ExperimentKind::error_lambda: return "error-lambda";
    case ExperimentKind::error_j: return "error-j";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::phase_lambda, ExperimentKind::phase_nk, ExperimentKind::phase_nj,
                 ExperimentKind::error_lambda, ExperimentKind::error_j}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

namespace {

const std::set<std::string> kKnownParams = {"N", "M", "K", "J", "sigma", "k", "gamma", "lambda"};
const std::set<std::string> kIntegerParams = {"N", "M", "K", "J"};

bool is_phase(ExperimentKind kind) {
  return kind == ExperimentKind::phase_lambda || kind == ExperimentKind::phase_nk ||
         kind == ExperimentKind::phase_nj;
}

std::vector<double> arange(double lo, double hi, double step) {
  std::vector<double> v;
  const long n = std::lround((hi - lo) / step);
  for (long i = 0; i <= n; ++i) v.push_back(lo + step * static_cast<double>(i));
  return v;
}

std::map<std::string, double> base_parameters() {
  return {{"N", 100}, {"M", 150}, {"K", 3}, {"J", 3}, {"sigma", 0.1}, {"k", 3}, {"gamma", 0.02}};
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void GridSpec::validate() const {
  if (trials < 1) throw ConfigError("trials must be at least 1");
  std::vector<const Axis*> axes{&x_axis};
  if (y_axis) axes.push_back(&*y_axis);
  for (const Axis* a : axes) {
    if (!kKnownParams.count(a->name)) throw ConfigError("unknown axis parameter '" + a->name + "'");
    if (a->values.empty()) throw ConfigError("axis '" + a->name + "' has no values");
    if (fixed.count(a->name)) {
      throw ConfigError("parameter '" + a->name + "' is both an axis and fixed");
    }
  }
  if (y_axis && y_axis->name == x_axis.name) throw ConfigError("x and y axes must differ");
  for (const auto& [name, value] : fixed) {
    if (!kKnownParams.count(name)) throw ConfigError("unknown parameter '" + name + "'");
    (void)value;
  }
  auto check_value = [](const std::string& name, double v) {
    if (!std::isfinite(v)) throw ConfigError("parameter '" + name + "' must be finite");
    if (kIntegerParams.count(name) && (v != std::floor(v) || v < 0)) {
      throw ConfigError("parameter '" + name + "' must be a nonnegative integer");
    }
    if (v < 0) throw ConfigError("parameter '" + name + "' must be nonnegative");
  };
  for (const Axis* a : axes)
    for (double v : a->values) check_value(a->name, v);
  for (const auto& [name, value] : fixed) check_value(name, value);
}

std::size_t GridSpec::point_count() const {
  return x_axis.values.size() * (y_axis ? y_axis->values.size() : 1);
}

GridSpec default_grid(ExperimentKind kind, bool paper_scale) {
  GridSpec g;
  g.base_seed = 1;
  switch (kind) {
    case ExperimentKind::phase_lambda:
      g.x_axis = {"k", paper_scale ? arange(0.1, 4.0, 0.1)
                                   : std::vector<double>{0.1, 0.5, 1.0, 1.5, 3.0}};
      g.y_axis = Axis{"gamma", paper_scale ? arange(0.02, 0.5, 0.02)
                                           : std::vector<double>{0.01, 0.02, 0.05, 0.2, 0.5}};
      g.trials = paper_scale ? 50 : 20;
      break;
    case ExperimentKind::phase_nk:
    case ExperimentKind::phase_nj:
      g.x_axis = {"N", paper_scale ? arange(10, 160, 5)
                                   : std::vector<double>{10, 20, 30, 40, 50, 60, 70, 80, 100, 120}};
      g.y_axis = Axis{kind == ExperimentKind::phase_nk ? "K" : "J",
                      paper_scale ? arange(1, 8, 1) : arange(1, 5, 1)};
      g.trials = paper_scale ? 50 : 20;
      break;
    case ExperimentKind::error_lambda:
      g.x_axis = {"k", paper_scale ? arange(1.5, 5.0, 0.25)
                                   : std::vector<double>{1.5, 2.0, 2.5, 3.0, 3.5, 4.0}};
      g.trials = paper_scale ? 100 : 30;
      break;
    case ExperimentKind::error_j:
      g.x_axis = {"J", paper_scale ? arange(1, 10, 1) : arange(1, 6, 1)};
      g.trials = paper_scale ? 100 : 30;
      break;
  }
  return g;
}

double ExperimentRecord::value(const std::string& name) const {
  for (const auto& [n, v] : point)
    if (n == name) return v;
  throw ConfigError("record has no parameter '" + name + "'");
}

// ---------------------------------------------------------------------------
// Runner

namespace {

struct PointSetup {
  InstanceParams params;
  double lambda = 0.0;
  std::vector<std::pair<std::string, double>> point;
};

PointSetup make_point(const GridSpec& spec, std::size_t ix, std::size_t iy) {
  std::map<std::string, double> p = base_parameters();
  for (const auto& [name, value] : spec.fixed) p[name] = value;
  PointSetup s;
  p[spec.x_axis.name] = spec.x_axis.values[ix];
  s.point.emplace_back(spec.x_axis.name, spec.x_axis.values[ix]);
  if (spec.y_axis) {
    p[spec.y_axis->name] = spec.y_axis->values[iy];
    s.point.emplace_back(spec.y_axis->name, spec.y_axis->values[iy]);
  }
  InstanceParams& ip = s.params;
  ip.n = static_cast<Index>(p["N"]);
  ip.m = static_cast<Index>(p["M"]);
  ip.k = static_cast<Index>(p["K"]);
  ip.j = static_cast<Index>(p["J"]);
  ip.sigma = p["sigma"];
  ip.seed = spec.base_seed;
  if (p["gamma"] > 0.0) ip.gamma_target = p["gamma"];
  try {
    ip.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid grid point: ") + e.what());
  }
  if (ip.gamma_target && ip.sigma == 0.0) {
    throw ConfigError("gamma rescaling needs sigma > 0; set gamma = 0 to disable it");
  }
  if (p.count("lambda")) {
    s.lambda = p["lambda"];
  } else {
    if (ip.m <= ip.j) throw ConfigError("lambda = k * gamma_0 needs M > J");
    // Experiments use the DFT basis, whose coherence is exactly 1.
    const BoundInputs b{.n = ip.n, .m = ip.m, .k = ip.k, .j = ip.j, .sigma = ip.sigma,
                        .mu_max = 1.0};
    s.lambda = p["k"] * gamma_zero(b);
  }
  if (!(s.lambda > 0.0)) throw ConfigError("lambda must be positive at every grid point");
  return s;
}

struct TrialOutcome {
  bool exact = false;
  double error = 0.0;
  double ms = 0.0;
};

void require_axes(const GridSpec& spec, std::initializer_list<std::string> x_names,
                  std::optional<std::string> y_name, const char* what) {
  bool ok = std::find(x_names.begin(), x_names.end(), spec.x_axis.name) != x_names.end();
  if (y_name) {
    ok = ok && spec.y_axis && spec.y_axis->name == *y_name;
  } else {
    ok = ok && !spec.y_axis;
  }
  if (!ok) throw ConfigError(std::string(what) + ": unexpected grid axes");
}

}  // namespace

ExperimentTable run_experiment(ExperimentKind kind, const GridSpec& spec, const RunOptions& opts) {
  spec.validate();
  opts.solver.validate();
  if (opts.workers < 1) throw ConfigError("workers must be at least 1");

  const std::size_t nx = spec.x_axis.values.size();
  const std::size_t ny = spec.y_axis ? spec.y_axis->values.size() : 1;
  std::vector<PointSetup> points;
  points.reserve(nx * ny);
  for (std::size_t ix = 0; ix < nx; ++ix)
    for (std::size_t iy = 0; iy < ny; ++iy) points.push_back(make_point(spec, ix, iy));

  const auto trials = static_cast<std::size_t>(spec.trials);
  const std::size_t tasks = points.size() * trials;
  std::vector<TrialOutcome> outcomes(tasks);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<std::size_t> done{0};
  const bool square = kind == ExperimentKind::error_j;

#pragma omp parallel for schedule(dynamic, 1) num_threads(opts.workers)
  for (std::size_t t = 0; t < tasks; ++t) {
    {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (failure) continue;
    }
    try {
      const PointSetup& ps = points[t / trials];
      InstanceParams ip = ps.params;
      ip.stream = trial_stream(0, t % trials);
      const auto start = std::chrono::steady_clock::now();
      const Instance inst = gen_instance(ip);
      const GroupLassoSolution sol = solve_group_lasso(*inst.op, inst.y, ps.lambda, opts.solver);
      const SupportMetrics m =
          support_metrics(sol.estimate, inst.x0, inst.support, opts.support_threshold);
      TrialOutcome& out = outcomes[t];
      out.exact = m.exact;
      out.error = square ? m.l2inf_error * m.l2inf_error : m.l2inf_error;
      out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                   .count();
      const std::size_t finished = ++done;
      if (opts.progress && (finished % std::max<std::size_t>(1, tasks / 100) == 0 ||
                            finished == tasks)) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        std::fprintf(stderr, "\r%s: %zu/%zu trials", to_string(kind).c_str(), finished, tasks);
        if (finished == tasks) std::fputc('\n', stderr);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentTable table;
  table.kind = kind;
  table.metric = square ? "l2inf_sq" : "l2inf";
  table.axis_names.push_back(spec.x_axis.name);
  table.axis_lengths.push_back(nx);
  if (spec.y_axis) {
    table.axis_names.push_back(spec.y_axis->name);
    table.axis_lengths.push_back(ny);
  }
  for (std::size_t p = 0; p < points.size(); ++p) {
    ExperimentRecord rec;
    rec.point = points[p].point;
    rec.trial_count = spec.trials;
    double sum = 0.0;
    std::vector<double> errs;
    for (std::size_t t = 0; t < trials; ++t) {
      const TrialOutcome& o = outcomes[p * trials + t];
      rec.runtime_ms += o.ms;
      if (o.exact) {
        ++rec.success_count;
        errs.push_back(o.error);
        sum += o.error;
      }
    }
    if (!errs.empty()) {
      const double mean = sum / static_cast<double>(errs.size());
      double ss = 0.0;
      for (double e : errs) ss += (e - mean) * (e - mean);
      rec.mean_error = mean;
      rec.std_error = errs.size() > 1 ? std::sqrt(ss / static_cast<double>(errs.size() - 1)) : 0.0;
    }
    table.records.push_back(std::move(rec));
  }
  return table;
}

ExperimentTable run_lambda_gamma_phase(const GridSpec& spec, const RunOptions& opts) {
  require_axes(spec, {"k", "lambda"}, "gamma", "phase-lambda");
  return run_experiment(ExperimentKind::phase_lambda, spec, opts);
}

ExperimentTable run_n_vs_k_phase(const GridSpec& spec, const RunOptions& opts) {
  require_axes(spec, {"N"}, "K", "phase-nk");
  return run_experiment(ExperimentKind::phase_nk, spec, opts);
}

ExperimentTable run_n_vs_j_phase(const GridSpec& spec, const RunOptions& opts) {
  require_axes(spec, {"N"}, "J", "phase-nj");
  return run_experiment(ExperimentKind::phase_nj, spec, opts);
}

ExperimentTable run_error_vs_lambda(const GridSpec& spec, const RunOptions& opts) {
  require_axes(spec, {"k", "lambda"}, std::nullopt, "error-lambda");
  return run_experiment(ExperimentKind::error_lambda, spec, opts);
}

ExperimentTable run_error_vs_j(const GridSpec& spec, const RunOptions& opts) {
  require_axes(spec, {"J"}, std::nullopt, "error-j");
  return run_experiment(ExperimentKind::error_j, spec, opts);
}

// ---------------------------------------------------------------------------
// Analysis

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("fit_line: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw ParameterError("fit_line needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ParameterError("fit_line needs at least two distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    sse += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

std::vector<BoundaryPoint> phase_boundary(const ExperimentTable& table, const std::string& along,
                                          const std::string& across, double slack) {
  std::vector<double> groups;
  for (const auto& r : table.records) {
    const double a = r.value(across);
    if (std::find(groups.begin(), groups.end(), a) == groups.end()) groups.push_back(a);
  }
  std::vector<BoundaryPoint> out;
  for (double g : groups) {
    std::vector<std::pair<double, double>> curve;
    for (const auto& r : table.records)
      if (r.value(across) == g) curve.emplace_back(r.value(along), r.success_rate());
    std::sort(curve.begin(), curve.end());
    BoundaryPoint bp;
    bp.across = g;
    for (std::size_t i = 1; i < curve.size(); ++i)
      if (curve[i].second < curve[i - 1].second - slack) bp.monotone = false;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (curve[i].second >= 0.5) {
        if (i > 0) {
          const auto [x0, r0] = curve[i - 1];
          const auto [x1, r1] = curve[i];
          bp.crossing = x0 + (0.5 - r0) / (r1 - r0) * (x1 - x0);
        }
        break;
      }
    }
    out.push_back(bp);
  }
  return out;
}

LinearFit fit_boundary(const std::vector<BoundaryPoint>& boundary) {
  std::vector<double> x, y;
  for (const auto& b : boundary) {
    if (b.crossing) {
      x.push_back(b.across);
      y.push_back(*b.crossing);
    }
  }
  if (x.size() < 2) return {};
  return fit_line(x, y);
}

LinearFit fit_mean_error(const ExperimentTable& table) {
  if (table.axis_names.empty()) return {};
  std::vector<double> x, y;
  for (const auto& r : table.records) {
    if (r.mean_error) {
      x.push_back(r.value(table.axis_names[0]));
      y.push_back(*r.mean_error);
    }
  }
  if (x.size() < 2) return {};
  return fit_line(x, y);
}

std::string boundary_to_csv(const std::vector<BoundaryPoint>& boundary, const std::string& across) {
  std::string s = across + ",crossing,monotone\r\n";
  for (const auto& b : boundary) {
    s += format_double(b.across) + "," + (b.crossing ? format_double(*b.crossing) : "") + "," +
         (b.monotone ? "1" : "0") + "\r\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_field(const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
  std::string q = "\"";
  for (char c : f) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty()) throw ParseError("stray quote inside field", line, 0);
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      field_started = false;
      ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line, 0);
  if (field_started || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_number(const std::string& s, std::size_t line, std::size_t col) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("bad number '" + s + "'", line, col);
  }
  return v;
}

const std::vector<std::string> kTailColumns = {"trials",     "successes",  "success_rate",
                                               "metric",     "mean_error", "std_error"};

}  // namespace

std::string table_to_csv(const ExperimentTable& table) {
  std::string s = "experiment";
  for (const auto& a : table.axis_names) s += "," + csv_field(a);
  for (const auto& c : kTailColumns) s += "," + c;
  s += "\r\n";
  for (const auto& r : table.records) {
    s += to_string(table.kind);
    for (const auto& [name, v] : r.point) s += "," + format_double(v);
    s += "," + std::to_string(r.trial_count) + "," + std::to_string(r.success_count) + "," +
         format_double(r.success_rate()) + "," + csv_field(table.metric) + "," +
         (r.mean_error ? format_double(*r.mean_error) : "") + "," +
         (r.std_error ? format_double(*r.std_error) : "") + "\r\n";
  }
  return s;
}

ExperimentTable table_from_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw ParseError("empty CSV", 1, 1);
  const auto& header = rows[0];
  if (header.size() < 1 + kTailColumns.size() || header[0] != "experiment") {
    throw ParseError("unexpected CSV header", 1, 1);
  }
  const std::size_t naxes = header.size() - 1 - kTailColumns.size();
  for (std::size_t c = 0; c < kTailColumns.size(); ++c) {
    if (header[1 + naxes + c] != kTailColumns[c]) {
      throw ParseError("unexpected column '" + header[1 + naxes + c] + "'", 1, 2 + naxes + c);
    }
  }
  ExperimentTable t;
  t.axis_names.assign(header.begin() + 1, header.begin() + 1 + static_cast<long>(naxes));
  std::vector<std::vector<double>> seen(naxes);
  for (std::size_t li = 1; li < rows.size(); ++li) {
    const auto& row = rows[li];
    const std::size_t line = li + 1;
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != header.size()) throw ParseError("wrong number of fields", line, 1);
    try {
      t.kind = parse_experiment_kind(row[0]);
    } catch (const ConfigError&) {
      throw ParseError("unknown experiment '" + row[0] + "'", line, 1);
    }
    ExperimentRecord r;
    for (std::size_t a = 0; a < naxes; ++a) {
      const double v = parse_number(row[1 + a], line, 2 + a);
      r.point.emplace_back(t.axis_names[a], v);
      if (std::find(seen[a].begin(), seen[a].end(), v) == seen[a].end()) seen[a].push_back(v);
    }
    const std::size_t b = 1 + naxes;
    r.trial_count = static_cast<long>(parse_number(row[b], line, b + 1));
    r.success_count = static_cast<long>(parse_number(row[b + 1], line, b + 2));
    if (r.success_count > r.trial_count) {
      throw ParseError("successes exceed trials", line, b + 2);
    }
    t.metric = row[b + 3];
    if (!row[b + 4].empty()) r.mean_error = parse_number(row[b + 4], line, b + 5);
    if (!row[b + 5].empty()) r.std_error = parse_number(row[b + 5], line, b + 6);
    t.records.push_back(std::move(r));
  }
  for (const auto& s : seen) t.axis_lengths.push_back(s.size());
  return t;
}

std::string timing_to_csv(const ExperimentTable& table) {
  std::string s;
  for (std::size_t i = 0; i < table.axis_names.size(); ++i) {
    s += (i ? "," : "") + csv_field(table.axis_names[i]);
  }
  s += ",runtime_ms\r\n";
  for (const auto& r : table.records) {
    for (std::size_t i = 0; i < r.point.size(); ++i) {
      s += (i ? "," : "") + format_double(r.point[i].second);
    }
    s += "," + format_double(r.runtime_ms) + "\r\n";
  }
  return s;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "plot") return ReportFormat::plot;
  if (name == "both") return ReportFormat::both;
  throw ConfigError("unknown format '" + name + "' (csv, plot or both)");
}

// ---------------------------------------------------------------------------
// Plots

namespace {

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << data;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// One pixel per cell, x left to right, y bottom to top, 255 = rate 1.
std::string heatmap_pgm(const ExperimentTable& t) {
  const std::size_t nx = t.axis_lengths.at(0);
  const std::size_t ny = t.axis_lengths.size() > 1 ? t.axis_lengths[1] : 1;
  std::ostringstream s;
  s << "P2\n" << nx << " " << ny << "\n255\n";
  for (std::size_t row = 0; row < ny; ++row) {
    const std::size_t iy = ny - 1 - row;
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const auto& r = t.records[ix * ny + iy];
      s << (ix ? " " : "") << std::lround(255.0 * r.success_rate());
    }
    s << "\n";
  }
  return s.str();
}

struct Canvas {
  int w, h;
  std::vector<unsigned char> rgb;
  Canvas(int w_, int h_) : w(w_), h(h_), rgb(static_cast<std::size_t>(w_ * h_ * 3), 255) {}
  void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    auto* p = &rgb[static_cast<std::size_t>((y * w + x) * 3)];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
  void line(int x0, int y0, int x1, int y1, unsigned char r, unsigned char g, unsigned char b) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  std::string ppm() const {
    std::string s = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    s.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
    return s;
  }
};

/// Conditional mean error with +-1 std bars against the x axis.
std::string line_chart_ppm(const ExperimentTable& t) {
  constexpr int W = 640, H = 480, pad = 40;
  Canvas c(W, H);
  std::vector<std::array<double, 3>> pts;
  for (const auto& r : t.records) {
    if (r.mean_error) pts.push_back({r.point.at(0).second, *r.mean_error, r.std_error.value_or(0)});
  }
  c.line(pad, H - pad, W - pad, H - pad, 0, 0, 0);
  c.line(pad, H - pad, pad, pad, 0, 0, 0);
  if (pts.empty()) return c.ppm();
  double xlo = pts.front()[0], xhi = xlo, yhi = 0.0;
  for (const auto& p : pts) {
    xlo = std::min(xlo, p[0]);
    xhi = std::max(xhi, p[0]);
    yhi = std::max(yhi, p[1] + p[2]);
  }
  if (xhi == xlo) xhi = xlo + 1.0;
  if (yhi <= 0.0) yhi = 1.0;
  auto px = [&](double x) { return pad + static_cast<int>(std::lround((x - xlo) / (xhi - xlo) * (W - 2 * pad))); };
  auto py = [&](double y) { return H - pad - static_cast<int>(std::lround(y / yhi * (H - 2 * pad))); };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const int x = px(p[0]);
    c.line(x, py(std::max(0.0, p[1] - p[2])), x, py(p[1] + p[2]), 200, 40, 40);
    c.line(x - 3, py(p[1] + p[2]), x + 3, py(p[1] + p[2]), 200, 40, 40);
    c.line(x - 3, py(std::max(0.0, p[1] - p[2])), x + 3, py(std::max(0.0, p[1] - p[2])), 200, 40, 40);
    if (i > 0) c.line(px(pts[i - 1][0]), py(pts[i - 1][1]), x, py(p[1]), 30, 60, 200);
    for (int d = -2; d <= 2; ++d) c.line(x - 2, py(p[1]) + d, x + 2, py(p[1]) + d, 30, 60, 200);
  }
  return c.ppm();
}

}  // namespace

std::vector<std::string> emit_report(const ExperimentTable& table, ReportFormat format,
                                     const std::string& dir, const std::string& stem) {
  if (table.records.empty()) throw ParameterError("emit_report: empty table");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  if (format == ReportFormat::csv || format == ReportFormat::both) {
    const fs::path csv = fs::path(dir) / (stem + ".csv");
    write_file(csv, table_to_csv(table));
    written.push_back(csv.string());
    const fs::path timing = fs::path(dir) / (stem + "_timing.csv");
    write_file(timing, timing_to_csv(table));
    written.push_back(timing.string());
  }
  if (format == ReportFormat::plot || format == ReportFormat::both) {
    if (is_phase(table.kind)) {
      const fs::path img = fs::path(dir) / (stem + ".pgm");
      write_file(img, heatmap_pgm(table));
      written.push_back(img.string());
    } else {
      const fs::path img = fs::path(dir) / (stem + ".ppm");
      write_file(img, line_chart_ppm(table));
      written.push_back(img.string());
    }
  }
  return written;
}

}  // namespace glift
