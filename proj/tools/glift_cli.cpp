#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glift/experiments.hpp"
#include "glift/smi.hpp"
#include "glift/synth.hpp"
#include "glift/theory.hpp"

namespace fs = std::filesystem;
using namespace glift;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  long trials = 0;  // 0: experiment default
  std::string out_dir = "out";
  std::string format = "csv";
  bool paper_scale = false;
  int workers = 1;
  bool progress = false;
};

struct GridArgs {
  std::string x_axis, y_axis;
  std::vector<double> x_values, y_values;
  std::vector<std::string> fixed;
  std::string step_mode = "fista";
};

struct ProblemArgs {
  long n = 100, m = 150, k = 3, j = 3;
  double sigma = 0.1;
  double gamma = 0.02;
  double kfac = 3.0;
  std::string basis = "dft-first-k";
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

GridSpec build_grid(ExperimentKind kind, const Globals& g, const GridArgs& a) {
  GridSpec spec = default_grid(kind, g.paper_scale);
  spec.base_seed = g.seed;
  if (g.trials > 0) spec.trials = g.trials;
  if (!a.x_axis.empty()) spec.x_axis.name = a.x_axis;
  if (!a.x_values.empty()) spec.x_axis.values = a.x_values;
  if (!a.y_axis.empty()) {
    if (a.y_axis == "none") {
      spec.y_axis.reset();
    } else {
      if (!spec.y_axis) spec.y_axis = Axis{};
      spec.y_axis->name = a.y_axis;
    }
  }
  if (!a.y_values.empty()) {
    if (!spec.y_axis) throw ConfigError("--y-values given without a y axis");
    spec.y_axis->values = a.y_values;
  }
  for (const auto& kv : a.fixed) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    try {
      std::size_t used = 0;
      spec.fixed[key] = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ConfigError("--set " + key + ": '" + val + "' is not a number");
    }
  }
  return spec;
}

int run_grid(ExperimentKind kind, const Globals& g, const GridArgs& a) {
  const GridSpec spec = build_grid(kind, g, a);
  RunOptions opts;
  opts.workers = g.workers;
  opts.progress = g.progress;
  if (a.step_mode == "bb") {
    opts.solver.step_mode = StepMode::bb_nonmonotone;
  } else if (a.step_mode != "fista") {
    throw ConfigError("--solver must be fista or bb");
  }
  ExperimentTable table;
  switch (kind) {
    case ExperimentKind::phase_lambda: table = run_lambda_gamma_phase(spec, opts); break;
    case ExperimentKind::phase_nk: table = run_n_vs_k_phase(spec, opts); break;
    case ExperimentKind::phase_nj: table = run_n_vs_j_phase(spec, opts); break;
    case ExperimentKind::error_lambda: table = run_error_vs_lambda(spec, opts); break;
    case ExperimentKind::error_j: table = run_error_vs_j(spec, opts); break;
  }
  const std::string stem = to_string(kind);
  for (const auto& path : emit_report(table, parse_report_format(g.format), g.out_dir, stem)) {
    std::cout << "wrote " << path << "\n";
  }
  if (kind == ExperimentKind::phase_nk || kind == ExperimentKind::phase_nj) {
    const std::string across = table.axis_names.at(1);
    const auto boundary = phase_boundary(table, "N", across, 0.15);
    const fs::path path = fs::path(g.out_dir) / (stem + "_boundary.csv");
    write_text(path, boundary_to_csv(boundary, across));
    std::cout << "wrote " << path.string() << "\n";
    bool monotone = true;
    for (const auto& b : boundary) {
      std::cout << across << "=" << fmt(b.across) << " N*="
                << (b.crossing ? fmt(*b.crossing) : std::string("none"))
                << (b.monotone ? "" : " (non-monotone)") << "\n";
      monotone = monotone && b.monotone;
    }
    const LinearFit f = fit_boundary(boundary);
    std::cout << "boundary fit: slope=" << fmt(f.slope) << " intercept=" << fmt(f.intercept)
              << " r2=" << fmt(f.r2) << "\nmonotone in N: " << (monotone ? "yes" : "no") << "\n";
  } else if (kind == ExperimentKind::error_lambda || kind == ExperimentKind::error_j) {
    const LinearFit f = fit_mean_error(table);
    std::cout << table.metric << " vs " << table.axis_names[0] << ": slope=" << fmt(f.slope)
              << " intercept=" << fmt(f.intercept) << " r2=" << fmt(f.r2) << "\n";
  }
  return 0;
}

BoundInputs bound_inputs(const ProblemArgs& p) {
  BoundInputs b;
  b.n = p.n;
  b.m = p.m;
  b.k = p.k;
  b.j = p.j;
  b.sigma = p.sigma;
  return b;
}

InstanceParams instance_params(const ProblemArgs& p, std::uint64_t seed) {
  InstanceParams ip;
  ip.n = p.n;
  ip.m = p.m;
  ip.k = p.k;
  ip.j = p.j;
  ip.sigma = p.sigma;
  ip.basis = parse_basis_kind(p.basis);
  if (p.gamma > 0.0) ip.gamma_target = p.gamma;
  ip.seed = seed;
  return ip;
}

void add_problem_options(CLI::App* app, ProblemArgs& p) {
  app->add_option("--N", p.n, "observations")->capture_default_str();
  app->add_option("--M", p.m, "dictionary atoms")->capture_default_str();
  app->add_option("--K", p.k, "subspace dimension")->capture_default_str();
  app->add_option("--J", p.j, "sparsity")->capture_default_str();
  app->add_option("--sigma", p.sigma, "noise standard deviation")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-lasso recovery of lifted non-stationary blind deconvolution"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file");

  Globals g;
  app.add_option("--seed", g.seed, "base seed")->capture_default_str();
  app.add_option("--trials", g.trials, "trials per grid point (0: experiment default)");
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--format", g.format, "csv, plot or both")
      ->check(CLI::IsMember({"csv", "plot", "both"}))
      ->capture_default_str();
  app.add_flag("--paper-scale", g.paper_scale, "use the published grid sizes and trial counts");
  app.add_option("--workers", g.workers, "parallel workers")->check(CLI::PositiveNumber);
  app.add_flag("--progress", g.progress, "print a progress line on stderr");

  GridArgs grid;
  std::map<ExperimentKind, CLI::App*> grid_cmds;
  for (auto kind : {ExperimentKind::phase_lambda, ExperimentKind::phase_nk,
                    ExperimentKind::phase_nj, ExperimentKind::error_lambda,
                    ExperimentKind::error_j}) {
    CLI::App* sub = app.add_subcommand(to_string(kind), "run the " + to_string(kind) + " grid");
    sub->add_option("--x-axis", grid.x_axis, "x axis parameter");
    sub->add_option("--x-values", grid.x_values, "x axis values")->delimiter(',');
    sub->add_option("--y-axis", grid.y_axis, "y axis parameter ('none' to drop it)");
    sub->add_option("--y-values", grid.y_values, "y axis values")->delimiter(',');
    sub->add_option("--set", grid.fixed, "fixed parameter KEY=VALUE (N, M, K, J, sigma, k, gamma, lambda)");
    sub->add_option("--solver", grid.step_mode, "fista or bb")->capture_default_str();
    grid_cmds[kind] = sub;
  }

  ProblemArgs prob;
  double alpha = 2.0, c1 = 1.0, c2 = 1.0, cerr = 1.0, mu = 1.0, lambda_arg = -1.0;
  CLI::App* bounds = app.add_subcommand("bounds", "print the recovery bound calculators");
  add_problem_options(bounds, prob);
  bounds->add_option("--mu", mu, "coherence mu_max")->capture_default_str();
  bounds->add_option("--alpha", alpha, "probability parameter")->capture_default_str();
  bounds->add_option("--c1", c1, "sample-complexity constant")->capture_default_str();
  bounds->add_option("--c2", c2, "lambda constant")->capture_default_str();
  bounds->add_option("--cerr", cerr, "error constant")->capture_default_str();
  bounds->add_option("--k", prob.kfac, "lambda = k * gamma_0 for the error bound")->capture_default_str();
  bounds->add_option("--lambda", lambda_arg, "explicit lambda for the error bound");

  std::string dump_path, instance_path;
  CLI::App* certify = app.add_subcommand("certify", "primal-dual witness certificate on one instance");
  add_problem_options(certify, prob);
  certify->add_option("--gamma", prob.gamma, "target gamma (0: no rescaling)")->capture_default_str();
  certify->add_option("--k", prob.kfac, "lambda = k * gamma_0")->capture_default_str();
  certify->add_option("--lambda", lambda_arg, "explicit lambda");
  certify->add_option("--basis", prob.basis, "dft-first-k, identity-first-k, random-orthonormal")
      ->capture_default_str();
  certify->add_option("--dump", dump_path, "save the generated instance");
  certify->add_option("--instance", instance_path, "load an instance instead of generating one");

  long tail_k = 3, tail_n = 100, tail_trials = 100000;
  double tail_sigma = 1.0;
  std::vector<double> tail_alphas{1.5, 2.0, 3.0};
  CLI::App* tail = app.add_subcommand("tailcheck", "Monte-Carlo check of the Gaussian quadratic tail bounds");
  tail->add_option("--K", tail_k)->capture_default_str();
  tail->add_option("--N", tail_n)->capture_default_str();
  tail->add_option("--sigma", tail_sigma)->capture_default_str();
  tail->add_option("--alphas", tail_alphas)->delimiter(',');
  tail->add_option("--samples", tail_trials, "samples per (alpha, branch)")->capture_default_str();

  long smi_n = 16, smi_factor = 5, smi_frames = 10, smi_per_frame = 3, smi_k = 3, smi_patch = 25;
  double smi_sigma = -1.0, smi_snr_db = 20.0, smi_intensity = 1.0;
  double wmin = 1.0, wmax = 4.0;
  std::string smi_mode = "block-average", stack_path = "stack.fstack";
  CLI::App* synth = app.add_subcommand("smi-synth", "generate a synthetic frame stack and its truth");
  synth->add_option("--n", smi_n, "low-res side")->capture_default_str();
  synth->add_option("--factor", smi_factor, "high-res factor")->capture_default_str();
  synth->add_option("--frames", smi_frames)->capture_default_str();
  synth->add_option("--per-frame", smi_per_frame, "sources per frame")->capture_default_str();
  synth->add_option("--intensity", smi_intensity)->capture_default_str();
  synth->add_option("--sigma", smi_sigma, "noise std (overrides --snr-db)");
  synth->add_option("--snr-db", smi_snr_db, "20 log10(peak / sigma) of the first frame")
      ->capture_default_str();
  synth->add_option("--wmin", wmin)->capture_default_str();
  synth->add_option("--wmax", wmax)->capture_default_str();
  synth->add_option("--mode", smi_mode, "block-average or decimate")->capture_default_str();
  synth->add_option("--K", smi_k, "PSF subspace dimension")->capture_default_str();
  synth->add_option("--patch", smi_patch, "PSF patch size")->capture_default_str();

  double lambda_factor = 0.2;
  bool mean_subtract = false, no_mean_subtract = false, want_png = false;
  CLI::App* recover = app.add_subcommand("smi-recover", "recover a frame stack into a high-res image");
  recover->add_option("--input", stack_path, "FSTACK file")->required();
  recover->add_option("--factor", smi_factor)->capture_default_str();
  recover->add_option("--K", smi_k)->capture_default_str();
  recover->add_option("--patch", smi_patch)->capture_default_str();
  recover->add_option("--wmin", wmin)->capture_default_str();
  recover->add_option("--wmax", wmax)->capture_default_str();
  recover->add_option("--mode", smi_mode)->capture_default_str();
  auto* lam_opt = recover->add_option("--lambda", lambda_arg, "explicit lambda");
  recover->add_option("--lambda-factor", lambda_factor, "lambda = f * ||L*(y)||_{2,inf} per frame")
      ->excludes(lam_opt)
      ->capture_default_str();
  recover->add_flag("--mean-subtract", mean_subtract, "subtract the stack mean (default for ingested data)");
  recover->add_flag("--no-mean-subtract", no_mean_subtract);
  recover->add_flag("--png", want_png, "also write a 16-bit PNG");

  std::vector<double> psf_widths;
  long psf_count = 9;
  CLI::App* psf = app.add_subcommand("smi-psf", "emit the PSF bank, its spectrum and basis images");
  psf->add_option("--K", smi_k)->capture_default_str();
  psf->add_option("--patch", smi_patch)->capture_default_str();
  psf->add_option("--wmin", wmin)->capture_default_str();
  psf->add_option("--wmax", wmax)->capture_default_str();
  psf->add_option("--count", psf_count)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [kind, cmd] : grid_cmds) {
      if (cmd->parsed()) return run_grid(kind, g, grid);
    }

    if (bounds->parsed()) {
      BoundInputs b = bound_inputs(prob);
      b.mu_max = mu;
      b.alpha = alpha;
      b.c_alpha_1 = c1;
      b.c_alpha_2 = c2;
      b.c_alpha_err = cerr;
      const double g0 = gamma_zero(b);
      const double lam = lambda_arg > 0.0 ? lambda_arg : prob.kfac * g0;
      std::cout << "gamma_0=" << fmt(g0) << "\n"
                << "lambda_lower_bound=" << fmt(lambda_lower_bound(b)) << "\n"
                << "sample_complexity=" << fmt(sample_complexity_bound(b)) << "\n"
                << "lambda=" << fmt(lam) << "\n"
                << "error_bound=" << fmt(error_bound(b, lam)) << "\n";
      return 0;
    }

    if (certify->parsed()) {
      const Instance inst = instance_path.empty() ? gen_instance(instance_params(prob, g.seed))
                                                  : load_instance(instance_path);
      if (!dump_path.empty()) {
        save_instance(dump_path, inst);
        std::cout << "wrote " << dump_path << "\n";
      }
      const InstanceParams& ip = inst.params;
      BoundInputs b = bound_inputs(prob);
      b.n = ip.n;
      b.m = ip.m;
      b.k = ip.k;
      b.j = ip.j;
      b.sigma = ip.sigma;
      b.mu_max = coherence(inst.op->basis());
      const double lam = lambda_arg > 0.0 ? lambda_arg : prob.kfac * gamma_zero(b);
      CMatrix x0t(ip.k, static_cast<Index>(inst.support.size()));
      for (std::size_t c = 0; c < inst.support.size(); ++c) {
        x0t.col(static_cast<Index>(c)) = inst.x0.col(inst.support[c]);
      }
      const WitnessReport rep = witness_certificate(*inst.op, inst.support, x0t, inst.noise, lam);
      const GroupLassoSolution sol = solve_group_lasso(*inst.op, inst.y, lam);
      const SupportMetrics sm = support_metrics(sol.estimate, inst.x0, inst.support);
      std::cout << "lambda=" << fmt(lam) << "\n"
                << "gram_min_eig=" << fmt(rep.gram_min_eig) << "\n"
                << "isometry_residual=" << fmt(rep.isometry_residual) << "\n"
                << "noise_correlation_2inf=" << fmt(rep.noise_correlation_2inf) << "\n"
                << "max_off_support_norm=" << fmt(rep.max_off_support_norm()) << "\n"
                << "routes_max_diff=" << fmt((rep.s_tc - rep.s_tc_via_delta).cwiseAbs().maxCoeff()) << "\n"
                << "certified=" << (rep.certified ? "yes" : "no") << "\n"
                << "solver_exact_support=" << (sm.exact ? "yes" : "no") << "\n"
                << "solver_l2inf_error=" << fmt(sm.l2inf_error) << "\n";
      return 0;
    }

    if (tail->parsed()) {
      ensure_dir(g.out_dir);
      std::string csv = "branch,alpha,samples,exceed_rate,bound,threshold\r\n";
      for (bool complex_input : {false, true}) {
        for (double a : tail_alphas) {
          const TailCheckResult r =
              tail_bound_check(tail_k, tail_n, tail_sigma, a, tail_trials, complex_input, g.seed);
          csv += std::string(complex_input ? "complex" : "real") + "," + fmt(a) + "," +
                 std::to_string(r.trials) + "," + fmt(r.empirical_rate) + "," + fmt(r.bound) +
                 "," + fmt(r.threshold) + "\r\n";
        }
      }
      const fs::path path = fs::path(g.out_dir) / "tailcheck.csv";
      write_text(path, csv);
      std::cout << csv << "wrote " << path.string() << "\n";
      return 0;
    }

    auto make_subspace = [&] {
      std::vector<double> widths(static_cast<std::size_t>(psf_count));
      for (long i = 0; i < psf_count; ++i) {
        widths[static_cast<std::size_t>(i)] =
            psf_count == 1 ? wmin : wmin + (wmax - wmin) * static_cast<double>(i) / static_cast<double>(psf_count - 1);
      }
      const PsfBank bank = make_psf_bank(widths, smi_patch);
      return std::make_pair(bank, psf_subspace(bank, smi_k));
    };

    if (synth->parsed()) {
      ensure_dir(g.out_dir);
      const auto [bank, sub] = make_subspace();
      const Index side = smi_n * smi_factor;
      const auto truth = random_sources(static_cast<std::size_t>(smi_frames), smi_per_frame, side,
                                        smi_patch / 2, wmin, wmax, smi_intensity, g.seed);
      SynthOptions so;
      so.n = smi_n;
      so.factor = smi_factor;
      so.mode = parse_sample_mode(smi_mode);
      so.seed = g.seed;
      if (smi_sigma >= 0.0) {
        so.sigma = smi_sigma;
      } else {
        const FrameStack clean = synth_stack(truth, static_cast<std::size_t>(smi_frames), sub, so);
        so.sigma = clean.frames.front().maxCoeff() / std::pow(10.0, smi_snr_db / 20.0);
      }
      const FrameStack stack = synth_stack(truth, static_cast<std::size_t>(smi_frames), sub, so);
      const fs::path sp = fs::path(g.out_dir) / "stack.fstack";
      save_fstack(sp.string(), stack);
      std::string csv = "frame,row,col,intensity,width\r\n";
      for (const auto& s : truth) {
        csv += std::to_string(s.frame) + "," + std::to_string(s.row) + "," + std::to_string(s.col) +
               "," + fmt(s.intensity) + "," + fmt(s.width) + "\r\n";
      }
      const fs::path tp = fs::path(g.out_dir) / "truth.csv";
      write_text(tp, csv);
      std::cout << "sigma=" << fmt(so.sigma) << "\nwrote " << sp.string() << "\nwrote "
                << tp.string() << "\n";
      return 0;
    }

    if (recover->parsed()) {
      ensure_dir(g.out_dir);
      FrameStack stack = load_fstack(stack_path);
      if (stack.frames.empty()) throw ParameterError("empty frame stack");
      const Index n = stack.frames.front().rows();
      if (stack.frames.front().cols() != n) throw ShapeError("frames must be square");
      // Ingested data defaults to mean subtraction.
      const bool subtract = mean_subtract || !no_mean_subtract;
      if (subtract) subtract_stack_mean(stack);
      const auto [bank, sub] = make_subspace();
      const SmiLift op(sub, n, smi_factor, parse_sample_mode(smi_mode));
      const bool by_factor = lambda_arg <= 0.0;
      const auto recs = recover_stack(stack, op, by_factor ? lambda_factor : lambda_arg, by_factor,
                                      RecoverOptions{}, g.workers);
      const RMatrix image = superimpose(recs, op.high_side());
      const fs::path img = fs::path(g.out_dir) / "highres.pgm";
      write_pgm16(img.string(), image);
      std::cout << "wrote " << img.string() << "\n";
      if (want_png) {
        const fs::path png = fs::path(g.out_dir) / "highres.png";
        write_png16(png.string(), image);
        std::cout << "wrote " << png.string() << "\n";
      }
      std::string csv = "frame,source,row,col,weight,pixels,lambda\r\n";
      for (std::size_t f = 0; f < recs.size(); ++f) {
        for (std::size_t s = 0; s < recs[f].sources.size(); ++s) {
          const auto& l = recs[f].sources[s];
          csv += std::to_string(f) + "," + std::to_string(s) + "," + fmt(l.row) + "," + fmt(l.col) +
                 "," + fmt(l.weight) + "," + std::to_string(l.pixels) + "," + fmt(recs[f].lambda) +
                 "\r\n";
        }
      }
      const fs::path lp = fs::path(g.out_dir) / "localizations.csv";
      write_text(lp, csv);
      std::ostringstream meta;
      meta << "sample_mode=" << to_string(op.mode()) << "\nfactor=" << smi_factor
           << "\nK=" << smi_k << "\nmean_subtracted=" << (subtract ? 1 : 0)
           << "\nlambda=" << (by_factor ? "factor " + fmt(lambda_factor) : fmt(lambda_arg))
           << "\nenergy_ratio_k=" << fmt(sub.energy_ratio_k) << "\n";
      const fs::path mp = fs::path(g.out_dir) / "recover_meta.txt";
      write_text(mp, meta.str());
      std::cout << "wrote " << lp.string() << "\nwrote " << mp.string() << "\n";
      return 0;
    }

    if (psf->parsed()) {
      ensure_dir(g.out_dir);
      const auto [bank, sub] = make_subspace();
      for (std::size_t i = 0; i < bank.psfs.size(); ++i) {
        write_pgm16((fs::path(g.out_dir) / ("psf_" + std::to_string(i) + ".pgm")).string(), bank.psfs[i]);
      }
      std::string csv = "index,singular_value,cumulative_energy\r\n";
      const double total = sub.singular_values.squaredNorm();
      double acc = 0.0;
      for (Index i = 0; i < sub.singular_values.size(); ++i) {
        acc += sub.singular_values(i) * sub.singular_values(i);
        csv += std::to_string(i) + "," + fmt(sub.singular_values(i)) + "," + fmt(acc / total) + "\r\n";
      }
      write_text(fs::path(g.out_dir) / "psf_spectrum.csv", csv);
      for (Index i = 0; i < sub.k(); ++i) {
        RMatrix b = sub.basis_image(i);
        b.array() -= b.minCoeff();
        write_pgm16((fs::path(g.out_dir) / ("basis_" + std::to_string(i) + ".pgm")).string(), b);
      }
      std::cout << "energy_ratio_k=" << fmt(sub.energy_ratio_k) << "\nwrote " << bank.psfs.size()
                << " PSFs, " << sub.k() << " basis images and psf_spectrum.csv to " << g.out_dir
                << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
