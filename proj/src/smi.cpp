#include "glift/smi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include <fftw3.h>
#include <Eigen/SVD>

#ifdef GLIFT_HAVE_PNG
#include <png.h>
#endif

#include "glift/rng.hpp"
#include "glift/synth.hpp"

namespace glift {

RMatrix gaussian_psf(double width, Index size) {
  if (size < 1 || size % 2 == 0) throw ParameterError("PSF size must be odd and positive");
  if (!(width > 0.0) || !std::isfinite(width)) throw ParameterError("PSF width must be positive");
  const Index h = size / 2;
  RMatrix p(size, size);
  for (Index r = 0; r < size; ++r) {
    for (Index c = 0; c < size; ++c) {
      const double x = static_cast<double>(c - h);
      const double y = static_cast<double>(r - h);
      p(r, c) = std::exp(-(x * x + y * y) / (2.0 * width * width));
    }
  }
  return p / p.sum();
}

std::vector<double> default_psf_widths() {
  std::vector<double> w(9);
  for (int i = 0; i < 9; ++i) w[static_cast<std::size_t>(i)] = 1.0 + 3.0 * i / 8.0;
  return w;
}

PsfBank make_psf_bank(const std::vector<double>& widths, Index size) {
  if (widths.empty()) throw ParameterError("PSF bank needs at least one width");
  PsfBank bank;
  bank.widths = widths;
  for (double w : widths) bank.psfs.push_back(gaussian_psf(w, size));
  return bank;
}

RMatrix PsfSubspace::basis_image(Index i) const {
  if (i < 0 || i >= k()) throw ParameterError("basis index out of range");
  return basis_spatial.col(i).reshaped(patch_size, patch_size);
}

RVector PsfSubspace::project(const RMatrix& patch) const {
  if (patch.rows() != patch_size || patch.cols() != patch_size) {
    throw ShapeError("patch size does not match the subspace");
  }
  return basis_spatial.transpose() * patch.reshaped();
}

PsfSubspace psf_subspace(const PsfBank& bank, Index k) {
  const auto count = static_cast<Index>(bank.psfs.size());
  if (count == 0) throw ParameterError("empty PSF bank");
  if (k < 1 || k > count) throw ParameterError("K must lie in [1, number of PSFs]");
  const Index h = bank.size();
  RMatrix stack(h * h, count);
  for (Index c = 0; c < count; ++c) {
    const RMatrix& p = bank.psfs[static_cast<std::size_t>(c)];
    if (p.rows() != h || p.cols() != h) throw ShapeError("PSFs in a bank must share one size");
    stack.col(c) = p.reshaped();
  }
  Eigen::JacobiSVD<RMatrix> svd(stack, Eigen::ComputeThinU);
  PsfSubspace sub;
  sub.patch_size = h;
  sub.singular_values = svd.singularValues();
  sub.basis_spatial = svd.matrixU().leftCols(k);
  for (Index i = 0; i < k; ++i) {
    auto col = sub.basis_spatial.col(i);
    double s = col.sum();
    if (std::abs(s) < 1e-12) {
      Index arg = 0;
      col.cwiseAbs().maxCoeff(&arg);
      s = col(arg);
    }
    if (s < 0) col = -col;
  }
  const double total = sub.singular_values.squaredNorm();
  sub.energy_ratio_k = total > 0.0 ? sub.singular_values.head(k).squaredNorm() / total : 1.0;
  return sub;
}

std::string to_string(SampleMode mode) {
  return mode == SampleMode::block_average ? "block-average" : "decimate";
}

SampleMode parse_sample_mode(const std::string& name) {
  if (name == "block-average") return SampleMode::block_average;
  if (name == "decimate") return SampleMode::decimate;
  throw ConfigError("unknown sample mode '" + name + "' (block-average or decimate)");
}

CMatrix sample_image(const CMatrix& high, Index factor, SampleMode mode) {
  if (factor < 1) throw ParameterError("factor must be positive");
  if (high.rows() != high.cols() || high.rows() % factor != 0) {
    throw ShapeError("high-res image must be square with side divisible by the factor");
  }
  const Index n = high.rows() / factor;
  CMatrix low(n, n);
  if (mode == SampleMode::decimate) {
    const Index off = factor / 2;
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b) low(a, b) = high(a * factor + off, b * factor + off);
  } else {
    const double scale = 1.0 / static_cast<double>(factor * factor);
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b)
        low(a, b) = high.block(a * factor, b * factor, factor, factor).sum() * scale;
  }
  return low;
}

CMatrix sample_adjoint(const CMatrix& low, Index factor, SampleMode mode) {
  if (factor < 1) throw ParameterError("factor must be positive");
  if (low.rows() != low.cols()) throw ShapeError("low-res image must be square");
  const Index n = low.rows();
  CMatrix high = CMatrix::Zero(n * factor, n * factor);
  if (mode == SampleMode::decimate) {
    const Index off = factor / 2;
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b) high(a * factor + off, b * factor + off) = low(a, b);
  } else {
    const double scale = 1.0 / static_cast<double>(factor * factor);
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b)
        high.block(a * factor, b * factor, factor, factor).setConstant(low(a, b) * scale);
  }
  return high;
}

CMatrix smi_forward_spatial(const CMatrix& x, const PsfSubspace& sub, Index n, Index factor,
                            SampleMode mode) {
  if (n < 1 || factor < 1) throw ParameterError("n and factor must be positive");
  const Index g = n * factor;
  if (x.rows() != sub.k() || x.cols() != g * g) throw ShapeError("X must be K x (n factor)^2");
  const Index hs = sub.patch_size;
  const Index half = hs / 2;
  CMatrix high = CMatrix::Zero(g, g);
  CVector patch(hs * hs);
  for (Index j = 0; j < g * g; ++j) {
    if (x.col(j).squaredNorm() == 0.0) continue;
    patch = sub.basis_spatial.cast<cplx>() * x.col(j);
    const Index r0 = j / g - half;
    const Index c0 = j % g - half;
    for (Index pc = 0; pc < hs; ++pc) {
      const Index c = c0 + pc;
      if (c < 0 || c >= g) continue;
      for (Index pr = 0; pr < hs; ++pr) {
        const Index r = r0 + pr;
        if (r < 0 || r >= g) continue;
        high(r, c) += patch(pr + hs * pc);
      }
    }
  }
  return sample_image(high, factor, mode);
}

CMatrix smi_forward_spatial(const CVector& c, const CMatrix& h, const PsfSubspace& sub, Index n,
                            Index factor, SampleMode mode) {
  if (c.size() != h.cols()) throw ShapeError("c and H disagree on M");
  return smi_forward_spatial(CMatrix(h * c.asDiagonal()), sub, n, factor, mode);
}

CVector frame_to_vector(const CMatrix& frame) {
  CVector v(frame.size());
  for (Index r = 0; r < frame.rows(); ++r)
    for (Index c = 0; c < frame.cols(); ++c) v(r * frame.cols() + c) = frame(r, c);
  return v;
}

CMatrix vector_to_frame(const CVector& v, Index side) {
  if (v.size() != side * side) throw ShapeError("vector length is not side^2");
  CMatrix f(side, side);
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c) f(r, c) = v(r * side + c);
  return f;
}

// ---------------------------------------------------------------------------
// FFT operator

namespace {

// Planning is not thread-safe in FFTW; execution on fresh arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(Index n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n)))) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  cplx* c() { return reinterpret_cast<cplx*>(data); }
  fftw_complex* data;
};

}  // namespace

struct SmiLift::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  ~Plans() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

SmiLift::SmiLift(const PsfSubspace& sub, Index n, Index factor, SampleMode mode)
    : n_(n), factor_(factor), g_(n * factor), k_(sub.k()), mode_(mode) {
  if (n < 1 || factor < 1) throw ParameterError("n and factor must be positive");
  if (k_ < 1) throw ParameterError("empty subspace");
  if (sub.patch_size > g_) throw ParameterError("PSF patch larger than the high-res grid");
  const Index gg = g_ * g_;
  plans_ = std::make_unique<Plans>();
  {
    FftwBuffer in(gg), out(gg);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    const int side = static_cast<int>(g_);
    plans_->fwd = fftw_plan_dft_2d(side, side, in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_->bwd = fftw_plan_dft_2d(side, side, in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (!plans_->fwd || !plans_->bwd) throw NumericalError("FFTW planning failed", 0);

  const Index hs = sub.patch_size;
  const Index half = hs / 2;
  FftwBuffer in(gg), out(gg);
  for (Index i = 0; i < k_; ++i) {
    std::fill(in.c(), in.c() + gg, cplx{0.0, 0.0});
    const RMatrix img = sub.basis_image(i);
    for (Index pr = 0; pr < hs; ++pr) {
      for (Index pc = 0; pc < hs; ++pc) {
        const Index r = ((pr - half) % g_ + g_) % g_;
        const Index c = ((pc - half) % g_ + g_) % g_;
        in.c()[r * g_ + c] += img(pr, pc);
      }
    }
    fftw_execute_dft(plans_->fwd, in.data, out.data);
    kernel_hat_.emplace_back(Eigen::Map<const CVector>(out.c(), gg));
  }
}

SmiLift::~SmiLift() = default;

void SmiLift::forward(const CMatrix& x, CVector& y) const {
  check_forward_shape(x);
  const Index gg = g_ * g_;
  FftwBuffer in(gg), out(gg);
  CVector acc = CVector::Zero(gg);
  for (Index i = 0; i < k_; ++i) {
    Eigen::Map<CVector>(in.c(), gg) = x.row(i).transpose();
    fftw_execute_dft(plans_->fwd, in.data, out.data);
    acc += Eigen::Map<const CVector>(out.c(), gg).cwiseProduct(kernel_hat_[static_cast<std::size_t>(i)]);
  }
  Eigen::Map<CVector>(in.c(), gg) = acc;
  fftw_execute_dft(plans_->bwd, in.data, out.data);
  const CVector high = Eigen::Map<const CVector>(out.c(), gg) / static_cast<double>(gg);
  y = frame_to_vector(sample_image(vector_to_frame(high, g_), factor_, mode_));
}

void SmiLift::adjoint(const CVector& y, CMatrix& x) const {
  check_adjoint_shape(y);
  const Index gg = g_ * g_;
  FftwBuffer in(gg), out(gg);
  Eigen::Map<CVector>(in.c(), gg) =
      frame_to_vector(sample_adjoint(vector_to_frame(y, n_), factor_, mode_));
  fftw_execute_dft(plans_->fwd, in.data, out.data);
  const CVector z_hat = Eigen::Map<const CVector>(out.c(), gg);
  x.resize(k_, gg);
  for (Index i = 0; i < k_; ++i) {
    Eigen::Map<CVector>(in.c(), gg) =
        z_hat.cwiseProduct(kernel_hat_[static_cast<std::size_t>(i)].conjugate());
    fftw_execute_dft(plans_->bwd, in.data, out.data);
    x.row(i) = Eigen::Map<const CVector>(out.c(), gg).transpose() / static_cast<double>(gg);
  }
}

// ---------------------------------------------------------------------------
// Synthesis and recovery

FrameStack synth_stack(const std::vector<SourceRecord>& truth, std::size_t frames,
                       const PsfSubspace& sub, const SynthOptions& opts) {
  if (opts.n < 1 || opts.factor < 1) throw ParameterError("n and factor must be positive");
  if (!(opts.sigma >= 0.0)) throw ParameterError("sigma must be nonnegative");
  const Index g = opts.n * opts.factor;
  std::vector<CMatrix> coeffs(frames, CMatrix::Zero(sub.k(), g * g));
  std::vector<Index> counts(frames, 0);
  for (const SourceRecord& s : truth) {
    if (s.frame >= frames) throw ParameterError("source frame index out of range");
    if (s.row < 0 || s.row >= g || s.col < 0 || s.col >= g) {
      throw ParameterError("source position outside the high-res grid");
    }
    if (++counts[s.frame] > opts.j_max) throw ParameterError("too many sources in one frame");
    const RVector h = sub.project(gaussian_psf(s.width, sub.patch_size));
    coeffs[s.frame].col(s.row * g + s.col) += (s.intensity * h).cast<cplx>();
  }
  FrameStack stack;
  stack.highres_factor = opts.factor;
  for (std::size_t f = 0; f < frames; ++f) {
    RMatrix frame = smi_forward_spatial(coeffs[f], sub, opts.n, opts.factor, opts.mode).real();
    if (opts.sigma > 0.0) {
      Sampler sampler(opts.seed, f);
      for (Index r = 0; r < opts.n; ++r)
        for (Index c = 0; c < opts.n; ++c) frame(r, c) += sampler.normal(opts.sigma);
    }
    stack.frames.push_back(std::move(frame));
  }
  return stack;
}

std::vector<SourceRecord> random_sources(std::size_t frames, Index per_frame, Index side,
                                         Index margin, double wmin, double wmax,
                                         double intensity, std::uint64_t seed) {
  if (per_frame < 0) throw ParameterError("per_frame must be nonnegative");
  if (margin < 0 || 2 * margin >= side) throw ParameterError("margin leaves no room for sources");
  if (!(wmin > 0.0 && wmax >= wmin)) throw ParameterError("bad width range");
  // Sources closer than this are merged by any reasonable localizer.
  const double min_sep = 4.0 * wmax;
  std::vector<SourceRecord> out;
  for (std::size_t f = 0; f < frames; ++f) {
    Sampler sampler(seed, f);
    std::vector<SourceRecord> placed;
    long attempts = 0;
    while (static_cast<Index>(placed.size()) < per_frame) {
      if (++attempts > 100000) throw ParameterError("cannot place isolated sources");
      SourceRecord s;
      s.frame = f;
      s.row = sampler.uniform_int(margin, side - 1 - margin);
      s.col = sampler.uniform_int(margin, side - 1 - margin);
      s.width = wmin == wmax ? wmin : sampler.uniform(wmin, wmax);
      s.intensity = intensity;
      const bool isolated = std::all_of(placed.begin(), placed.end(), [&](const SourceRecord& o) {
        return std::hypot(static_cast<double>(o.row - s.row), static_cast<double>(o.col - s.col)) >=
               min_sep;
      });
      if (isolated) placed.push_back(s);
    }
    out.insert(out.end(), placed.begin(), placed.end());
  }
  return out;
}

namespace {

std::vector<Localization> components(const SupportSet& support, const CMatrix& coeffs, Index g) {
  std::map<Index, std::size_t> where;
  for (std::size_t i = 0; i < support.size(); ++i) where[support[i]] = i;
  std::vector<bool> seen(support.size(), false);
  std::vector<Localization> out;
  for (std::size_t start = 0; start < support.size(); ++start) {
    if (seen[start]) continue;
    Localization loc;
    std::vector<std::size_t> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const std::size_t i = queue.back();
      queue.pop_back();
      const Index j = support[i];
      const double w = coeffs.col(static_cast<Index>(i)).norm();
      loc.row += w * static_cast<double>(j / g);
      loc.col += w * static_cast<double>(j % g);
      loc.weight += w;
      ++loc.pixels;
      for (Index dr = -1; dr <= 1; ++dr) {
        for (Index dc = -1; dc <= 1; ++dc) {
          const Index r = j / g + dr, c = j % g + dc;
          if ((dr == 0 && dc == 0) || r < 0 || c < 0 || r >= g || c >= g) continue;
          const auto it = where.find(r * g + c);
          if (it != where.end() && !seen[it->second]) {
            seen[it->second] = true;
            queue.push_back(it->second);
          }
        }
      }
    }
    if (loc.weight > 0.0) {
      loc.row /= loc.weight;
      loc.col /= loc.weight;
    }
    out.push_back(loc);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Localization& a, const Localization& b) { return a.weight > b.weight; });
  return out;
}

void check_frame(const RMatrix& frame, const SmiLift& op) {
  if (frame.rows() != op.low_side() || frame.cols() != op.low_side()) {
    throw ShapeError("frame dimensions do not match the operator");
  }
}

}  // namespace

double lambda_heuristic(const RMatrix& frame, const SmiLift& op, double k) {
  check_frame(frame, op);
  if (!(k > 0.0)) throw ParameterError("lambda factor must be positive");
  return k * norm_2inf(op.adjoint(frame_to_vector(frame.cast<cplx>())));
}

FrameRecovery recover_frame(const RMatrix& frame, const SmiLift& op, double lambda,
                            const RecoverOptions& opts) {
  check_frame(frame, op);
  const CVector y = frame_to_vector(frame.cast<cplx>());
  const GroupLassoSolution sol = solve_group_lasso(op, y, lambda, opts.solver);
  FrameRecovery rec;
  rec.lambda = lambda;
  rec.support = extract_support(sol.estimate, opts.support_threshold);
  rec.coefficients.resize(op.subspace_dim(), static_cast<Index>(rec.support.size()));
  for (std::size_t i = 0; i < rec.support.size(); ++i) {
    rec.coefficients.col(static_cast<Index>(i)) = sol.estimate.col(rec.support[i]);
  }
  rec.residual_norm = (y - op.forward(sol.estimate)).norm();
  rec.sources = components(rec.support, rec.coefficients, op.high_side());
  return rec;
}

std::vector<FrameRecovery> recover_stack(const FrameStack& stack, const SmiLift& op,
                                         double lambda, bool lambda_is_factor,
                                         const RecoverOptions& opts, int workers) {
  if (workers < 1) throw ConfigError("workers must be at least 1");
  const auto count = static_cast<long>(stack.frames.size());
  std::vector<FrameRecovery> out(stack.frames.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long f = 0; f < count; ++f) {
    try {
      const RMatrix& frame = stack.frames[static_cast<std::size_t>(f)];
      const double lam = lambda_is_factor ? lambda_heuristic(frame, op, lambda) : lambda;
      if (lam > 0.0) {
        out[static_cast<std::size_t>(f)] = recover_frame(frame, op, lam, opts);
      } else {
        // An all-zero frame under the heuristic; nothing to recover.
        out[static_cast<std::size_t>(f)].coefficients.resize(op.subspace_dim(), 0);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void subtract_stack_mean(FrameStack& stack) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto& f : stack.frames) {
    sum += f.sum();
    count += static_cast<double>(f.size());
  }
  if (count == 0.0) return;
  const double mean = sum / count;
  for (auto& f : stack.frames) f.array() -= mean;
}

RMatrix superimpose(const std::vector<FrameRecovery>& recoveries, Index side) {
  if (side < 1) throw ParameterError("side must be positive");
  // Per-pixel values are summed in sorted order so the image does not depend
  // on the order of the recoveries.
  std::map<Index, std::vector<double>> contributions;
  for (const auto& rec : recoveries) {
    if (static_cast<Index>(rec.support.size()) != rec.coefficients.cols()) {
      throw ShapeError("recovery support and coefficients disagree");
    }
    for (std::size_t i = 0; i < rec.support.size(); ++i) {
      const Index j = rec.support[i];
      if (j < 0 || j >= side * side) throw ShapeError("recovered position outside the image");
      contributions[j].push_back(rec.coefficients.col(static_cast<Index>(i)).norm());
    }
  }
  RMatrix img = RMatrix::Zero(side, side);
  for (auto& [j, vals] : contributions) {
    std::sort(vals.begin(), vals.end());
    double s = 0.0;
    for (double v : vals) s += v;
    img(j / side, j % side) = std::max(0.0, s);
  }
  return img;
}

// ---------------------------------------------------------------------------
// Files

namespace {

struct Token {
  std::string text;
  long column;
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back({line.substr(start, i - start), static_cast<long>(start) + 1});
  }
  return out;
}

long parse_count(const Token& t, long line, const char* what) {
  long v = 0;
  const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
  if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size() || v < 1) {
    throw ParseError(std::string("FSTACK header: bad ") + what + " '" + t.text + "'", line,
                     t.column);
  }
  return v;
}

}  // namespace

FrameStack read_fstack(std::istream& in) {
  std::string line;
  long lineno = 1;
  if (!std::getline(in, line)) throw ParseError("empty frame-stack file", 1, 1);
  const auto head = tokenize(line);
  if (head.empty() || head[0].text != "FSTACK") {
    throw ParseError("expected 'FSTACK' magic", 1, head.empty() ? 1 : head[0].column);
  }
  if (head.size() < 2 || head[1].text != "1") {
    throw ParseError("unsupported FSTACK version", 1,
                     head.size() < 2 ? static_cast<long>(line.size()) + 1 : head[1].column);
  }
  if (head.size() != 5) {
    throw ParseError("FSTACK header needs '<height> <width> <count>'", 1,
                     head.size() > 5 ? head[5].column : static_cast<long>(line.size()) + 1);
  }
  const long height = parse_count(head[2], 1, "height");
  const long width = parse_count(head[3], 1, "width");
  const long count = parse_count(head[4], 1, "count");

  FrameStack stack;
  for (long f = 0; f < count; ++f) {
    RMatrix frame(height, width);
    for (long r = 0; r < height; ++r) {
      std::vector<Token> toks;
      do {
        if (!std::getline(in, line)) {
          throw ParseError("unexpected end of file in frame " + std::to_string(f), lineno + 1, 1);
        }
        ++lineno;
        toks = tokenize(line);
      } while (toks.empty());
      if (static_cast<long>(toks.size()) != width) {
        throw ParseError("expected " + std::to_string(width) + " values, found " +
                             std::to_string(toks.size()),
                         lineno,
                         static_cast<long>(toks.size()) > width ? toks[static_cast<std::size_t>(width)].column
                                                               : static_cast<long>(line.size()) + 1);
      }
      for (long c = 0; c < width; ++c) {
        const Token& t = toks[static_cast<std::size_t>(c)];
        double v = 0.0;
        const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size() || !std::isfinite(v)) {
          throw ParseError("bad number '" + t.text + "'", lineno, t.column);
        }
        frame(r, c) = v;
      }
    }
    stack.frames.push_back(std::move(frame));
  }
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = tokenize(line);
    if (!toks.empty()) throw ParseError("trailing data after the last frame", lineno, toks[0].column);
  }
  return stack;
}

void write_fstack(std::ostream& out, const FrameStack& stack) {
  if (stack.frames.empty()) throw ParameterError("cannot write an empty frame stack");
  const Index h = stack.frames.front().rows();
  const Index w = stack.frames.front().cols();
  for (const auto& f : stack.frames) {
    if (f.rows() != h || f.cols() != w) throw ShapeError("frames must share dimensions");
  }
  out << "FSTACK 1 " << h << " " << w << " " << stack.frames.size() << "\n";
  char buf[64];
  for (const auto& f : stack.frames) {
    for (Index r = 0; r < h; ++r) {
      for (Index c = 0; c < w; ++c) {
        const auto res = std::to_chars(buf, buf + sizeof buf, f(r, c));
        if (c) out << ' ';
        out.write(buf, res.ptr - buf);
      }
      out << "\n";
    }
  }
  if (!out) throw IoError("failed writing frame stack");
}

FrameStack load_fstack(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_fstack(in);
}

void save_fstack(const std::string& path, const FrameStack& stack) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_fstack(out, stack);
}

namespace {

std::vector<std::uint16_t> scale16(const RMatrix& image) {
  const double top = image.size() ? image.maxCoeff() : 0.0;
  std::vector<std::uint16_t> v(static_cast<std::size_t>(image.size()), 0);
  if (!(top > 0.0)) return v;
  for (Index r = 0; r < image.rows(); ++r) {
    for (Index c = 0; c < image.cols(); ++c) {
      const double s = std::max(0.0, image(r, c)) / top * 65535.0;
      v[static_cast<std::size_t>(r * image.cols() + c)] = static_cast<std::uint16_t>(std::lround(s));
    }
  }
  return v;
}

}  // namespace

void write_pgm16(const std::string& path, const RMatrix& image) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const auto px = scale16(image);
  out << "P2\n" << image.cols() << " " << image.rows() << "\n65535\n";
  for (Index r = 0; r < image.rows(); ++r) {
    for (Index c = 0; c < image.cols(); ++c) {
      if (c) out << ' ';
      out << px[static_cast<std::size_t>(r * image.cols() + c)];
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

bool png_available() {
#ifdef GLIFT_HAVE_PNG
  return true;
#else
  return false;
#endif
}

#ifdef GLIFT_HAVE_PNG
void write_png16(const std::string& path, const RMatrix& image) {
  const auto w = static_cast<png_uint_32>(image.cols());
  const auto h = static_cast<png_uint_32>(image.rows());
  const auto px = scale16(image);
  std::vector<png_byte> row(2 * static_cast<std::size_t>(w));
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open '" + path + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng failed writing '" + path + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (png_uint_32 r = 0; r < h; ++r) {
    for (png_uint_32 c = 0; c < w; ++c) {
      const std::uint16_t v = px[r * w + c];
      row[2 * c] = static_cast<png_byte>(v >> 8);
      row[2 * c + 1] = static_cast<png_byte>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("failed closing '" + path + "'");
}
#else
void write_png16(const std::string&, const RMatrix&) {
  throw IoError("built without PNG support");
}
#endif

}  // namespace glift
