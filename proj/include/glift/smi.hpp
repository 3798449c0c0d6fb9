#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "glift/solver.hpp"

namespace glift {

// Image conventions: images are Eigen matrices indexed (row, col). A high-res
// position j on a side-g grid is row j / g, column j % g, and frames are
// vectorized in the same row-major order. PSF patches and basis columns use
// Eigen's column-major vectorization (pr + H * pc); all PSFs here are
// symmetric, so the two orders only matter for general patches.

/// exp(-(x^2 + y^2) / (2 width^2)) sampled on the integer grid centered at the
/// middle pixel, normalized to unit sum.
RMatrix gaussian_psf(double width, Index size);

struct PsfBank {
  std::vector<RMatrix> psfs;
  std::vector<double> widths;

  Index size() const { return psfs.empty() ? 0 : psfs.front().rows(); }
};

/// Nine widths linearly spaced over [1, 4] high-res pixels.
std::vector<double> default_psf_widths();
PsfBank make_psf_bank(const std::vector<double>& widths, Index size = 25);

struct PsfSubspace {
  /// P x K orthonormal columns (P = H^2), sign fixed to a positive sum.
  RMatrix basis_spatial;
  RVector singular_values;
  double energy_ratio_k = 0.0;
  Index patch_size = 0;

  Index k() const { return basis_spatial.cols(); }
  /// Column i reshaped to an H x H image.
  RMatrix basis_image(Index i) const;
  /// Least-squares coefficients of an H x H patch in the basis.
  RVector project(const RMatrix& patch) const;
};

PsfSubspace psf_subspace(const PsfBank& bank, Index k);

enum class SampleMode { block_average, decimate };

std::string to_string(SampleMode mode);
SampleMode parse_sample_mode(const std::string& name);

/// Downsamples a (n f) x (n f) image: block-average means each f x f cell,
/// decimate keeps pixel (a f + f/2, b f + f/2) (integer division).
CMatrix sample_image(const CMatrix& high, Index factor, SampleMode mode);
/// Adjoint of sample_image.
CMatrix sample_adjoint(const CMatrix& low, Index factor, SampleMode mode);

/// Spatial synthesis: places the patch B' x_j at every position j,
/// truncating at the image boundary, sums and subsamples. X is K x (n f)^2.
CMatrix smi_forward_spatial(const CMatrix& x, const PsfSubspace& sub, Index n, Index factor,
                            SampleMode mode);
/// Same with X = H diag(c).
CMatrix smi_forward_spatial(const CVector& c, const CMatrix& h, const PsfSubspace& sub, Index n,
                            Index factor, SampleMode mode);

/// Fourier-domain lifted operator: per channel i the coefficient map X(i, :)
/// is convolved (circularly, via FFTW) with basis image i, the channels are
/// summed, and the result is subsampled. Agrees with smi_forward_spatial for
/// sources whose patch does not cross the border.
class SmiLift final : public LiftedOperator {
 public:
  SmiLift(const PsfSubspace& sub, Index n, Index factor, SampleMode mode);
  ~SmiLift() override;
  SmiLift(const SmiLift&) = delete;
  SmiLift& operator=(const SmiLift&) = delete;

  Index rows() const override { return n_ * n_; }
  Index subspace_dim() const override { return k_; }
  Index atoms() const override { return g_ * g_; }
  void forward(const CMatrix& x, CVector& y) const override;
  void adjoint(const CVector& y, CMatrix& x) const override;
  using LiftedOperator::adjoint;
  using LiftedOperator::forward;

  Index low_side() const { return n_; }
  Index high_side() const { return g_; }
  Index factor() const { return factor_; }
  SampleMode mode() const { return mode_; }

 private:
  struct Plans;
  Index n_, factor_, g_, k_;
  SampleMode mode_;
  /// DFT of each zero-padded, wrap-centered basis image, g x g row-major.
  std::vector<CVector> kernel_hat_;
  std::unique_ptr<Plans> plans_;
};

CVector frame_to_vector(const CMatrix& frame);
CMatrix vector_to_frame(const CVector& v, Index side);

struct FrameStack {
  std::vector<RMatrix> frames;
  double pixel_pitch_nm = 100.0;
  Index highres_factor = 5;
};

struct SourceRecord {
  std::size_t frame = 0;
  Index row = 0;  ///< high-res row
  Index col = 0;  ///< high-res column
  double intensity = 1.0;
  double width = 2.0;
};

struct SynthOptions {
  Index n = 16;
  Index factor = 5;
  double sigma = 0.0;
  std::uint64_t seed = 1;
  SampleMode mode = SampleMode::block_average;
  /// Per-frame source cap.
  Index j_max = 18;
};

/// Renders each listed source as intensity * (projection of gaussian_psf(width)
/// onto the subspace) through smi_forward_spatial, then adds N(0, sigma^2)
/// noise per low-res pixel from Philox stream `frame` under key `seed`.
FrameStack synth_stack(const std::vector<SourceRecord>& truth, std::size_t frames,
                       const PsfSubspace& sub, const SynthOptions& opts);

/// Random isolated sources: `per_frame` per frame, positions at least `margin`
/// high-res pixels from the border, widths uniform over [wmin, wmax].
std::vector<SourceRecord> random_sources(std::size_t frames, Index per_frame, Index side,
                                         Index margin, double wmin, double wmax,
                                         double intensity, std::uint64_t seed);

struct Localization {
  double row = 0.0;
  double col = 0.0;
  /// Sum of ||x_j|| over the connected component.
  double weight = 0.0;
  std::size_t pixels = 0;
};

struct FrameRecovery {
  SupportSet support;
  /// K x |support|, columns in support order.
  CMatrix coefficients;
  double residual_norm = 0.0;
  double lambda = 0.0;
  /// 8-connected components of the support, by decreasing weight, located at
  /// their ||x_j||-weighted centroid.
  std::vector<Localization> sources;
};

struct RecoverOptions {
  SolverOptions solver = [] {
    SolverOptions s;
    s.step_mode = StepMode::bb_nonmonotone;
    return s;
  }();
  double support_threshold = 1e-2;
};

FrameRecovery recover_frame(const RMatrix& frame, const SmiLift& op, double lambda,
                            const RecoverOptions& opts = {});

/// k * ||L*(y)||_{2,inf}; the solution is zero for k >= 1.
double lambda_heuristic(const RMatrix& frame, const SmiLift& op, double k);

/// Recovers frames in parallel; results are in frame order.
std::vector<FrameRecovery> recover_stack(const FrameStack& stack, const SmiLift& op,
                                         double lambda, bool lambda_is_factor,
                                         const RecoverOptions& opts, int workers);

/// Subtracts the mean over all pixels of all frames.
void subtract_stack_mean(FrameStack& stack);

/// Sums ||x_j|| at each recovered position, clamped at 0. side = high-res side.
RMatrix superimpose(const std::vector<FrameRecovery>& recoveries, Index side);

// --- files -------------------------------------------------------------------

/// "FSTACK 1 <height> <width> <count>" then count frames of height lines of
/// width space-separated reals.
FrameStack read_fstack(std::istream& in);
void write_fstack(std::ostream& out, const FrameStack& stack);
FrameStack load_fstack(const std::string& path);
void save_fstack(const std::string& path, const FrameStack& stack);

/// P2 ASCII, maxval 65535, scaled so the image maximum maps to 65535.
/// Negative entries are written as 0.
void write_pgm16(const std::string& path, const RMatrix& image);
/// 16-bit grayscale PNG with the same scaling. Throws IoError when built
/// without libpng.
void write_png16(const std::string& path, const RMatrix& image);
bool png_available();

}  // namespace glift
