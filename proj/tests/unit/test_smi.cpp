#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "glift/rng.hpp"
#include "glift/smi.hpp"
#include "helpers.hpp"

using namespace glift;
using testing::inner;
namespace fs = std::filesystem;

namespace {

const PsfSubspace& default_subspace() {
  static const PsfSubspace sub = psf_subspace(make_psf_bank(default_psf_widths(), 25), 3);
  return sub;
}

// A source at high-res (r, c) of the given width, in the frame's coefficient
// layout, plus a dense reference rendering by direct 2-D convolution.
CMatrix source_coeffs(const PsfSubspace& sub, Index g, Index r, Index c, const RVector& h) {
  CMatrix x = CMatrix::Zero(sub.k(), g * g);
  x.col(r * g + c) = h.cast<cplx>();
  return x;
}

RMatrix convolve_delta(const RMatrix& psf, Index g, Index r, Index c) {
  const Index hs = psf.rows(), half = hs / 2;
  RMatrix img = RMatrix::Zero(g, g);
  for (Index u = 0; u < g; ++u)
    for (Index v = 0; v < g; ++v) {
      const Index pu = u - r + half, pv = v - c + half;
      if (pu >= 0 && pu < hs && pv >= 0 && pv < hs) img(u, v) = psf(pu, pv);
    }
  return img;
}

RMatrix block_mean(const RMatrix& hi, Index f) {
  const Index n = hi.rows() / f;
  RMatrix lo(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      double s = 0.0;
      for (Index i = 0; i < f; ++i)
        for (Index j = 0; j < f; ++j) s += hi(a * f + i, b * f + j);
      lo(a, b) = s / double(f * f);
    }
  return lo;
}

FrameRecovery single(Index pos, const CVector& coef) {
  FrameRecovery r;
  r.support = {pos};
  r.coefficients = coef;
  return r;
}

}  // namespace

TEST_SUITE("smi") {

TEST_CASE("gaussian psf") {
  for (double w : {0.7, 1.0, 2.5, 4.0}) {
    const RMatrix p = gaussian_psf(w, 25);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p(12, 12) == p.maxCoeff());
    for (Index i = 0; i < 25; ++i)
      for (Index j = 0; j < 25; ++j) {
        CHECK(p(i, j) == p(24 - i, j));
        CHECK(p(i, j) == p(i, 24 - j));
        CHECK(p(i, j) == p(j, i));
      }
  }
  const RMatrix d = gaussian_psf(1e-6, 7);
  CHECK(d(3, 3) == 1.0);
  CHECK(d.sum() == 1.0);

  const RMatrix q = gaussian_psf(2.0, 9);
  double z = 0.0;
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j) z += std::exp(-(i * i + j * j) / 8.0);
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j)
      CHECK(q(i + 4, j + 4) == doctest::Approx(std::exp(-(i * i + j * j) / 8.0) / z).epsilon(1e-13));

  CHECK_THROWS_AS(gaussian_psf(2.0, 8), ParameterError);
  CHECK_THROWS_AS(gaussian_psf(0.0, 9), ParameterError);
}

TEST_CASE("psf bank and subspace") {
  const std::vector<double> w = default_psf_widths();
  REQUIRE(w.size() == 9);
  CHECK(w.front() == 1.0);
  CHECK(w.back() == 4.0);
  const PsfBank bank = make_psf_bank(w, 25);
  CHECK(bank.size() == 25);

  const PsfSubspace& sub = default_subspace();
  CHECK(sub.k() == 3);
  CHECK(sub.energy_ratio_k >= 0.99);
  const RVector s2 = sub.singular_values.array().square();
  CHECK(sub.energy_ratio_k == doctest::Approx(s2.head(3).sum() / s2.sum()).epsilon(1e-14));
  const RMatrix gram = sub.basis_spatial.transpose() * sub.basis_spatial;
  CHECK((gram - RMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);

  const PsfBank one = make_psf_bank({2.0}, 11);
  const PsfSubspace s1 = psf_subspace(one, 1);
  CHECK(s1.energy_ratio_k == doctest::Approx(1.0));
  const RMatrix b = s1.basis_image(0);
  CHECK((b - one.psfs[0] / one.psfs[0].norm()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(psf_subspace(one, 2), ParameterError);
  CHECK_THROWS_AS(psf_subspace(bank, 0), ParameterError);

  // Projection of a bank member reconstructs it to within the lost energy.
  const RVector h = sub.project(bank.psfs[4]);
  const RMatrix back = (sub.basis_spatial * h).reshaped(25, 25);
  CHECK((back - bank.psfs[4]).norm() < 0.1 * bank.psfs[4].norm());
}

TEST_CASE("sampling and its adjoint") {
  Sampler s(1);
  for (SampleMode mode : {SampleMode::block_average, SampleMode::decimate}) {
    CHECK(parse_sample_mode(to_string(mode)) == mode);
    for (Index f : {1, 2, 5}) {
      const CMatrix hi = s.complex_normal_matrix(4 * f, 4 * f);
      const CMatrix lo = s.complex_normal_matrix(4, 4);
      const cplx lhs = inner(CMatrix(sample_image(hi, f, mode)), lo);
      const cplx rhs = inner(hi, CMatrix(sample_adjoint(lo, f, mode)));
      CHECK(std::abs(lhs - rhs) < 1e-12 * (hi.norm() * lo.norm() + 1));
    }
  }
  const RMatrix hi = s.normal_matrix(15, 15);
  const CMatrix avg = sample_image(hi.cast<cplx>(), 5, SampleMode::block_average);
  CHECK(std::abs(avg.sum().real() - hi.sum() / 25.0) < 1e-12);
  CHECK((avg.real() - block_mean(hi, 5)).cwiseAbs().maxCoeff() < 1e-14);
  const CMatrix dec = sample_image(hi.cast<cplx>(), 5, SampleMode::decimate);
  for (Index a = 0; a < 3; ++a)
    for (Index b = 0; b < 3; ++b) CHECK(dec(a, b).real() == hi(5 * a + 2, 5 * b + 2));
  CHECK_THROWS_AS(sample_image(CMatrix::Zero(7, 7), 2, SampleMode::decimate), ShapeError);
  CHECK_THROWS_AS(parse_sample_mode("nearest"), ConfigError);
}

TEST_CASE("spatial forward model") {
  const PsfSubspace& sub = default_subspace();
  const Index n = 10, f = 5, g = 50;
  CHECK(smi_forward_spatial(CMatrix::Zero(3, g * g), sub, n, f, SampleMode::block_average)
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // Delta-like PSF on the decimation grid hits exactly one low-res pixel.
  const PsfBank delta = make_psf_bank({1e-6}, 5);
  const PsfSubspace ds = psf_subspace(delta, 1);
  RVector one(1);
  one << 1.0;
  const CMatrix frame =
      smi_forward_spatial(source_coeffs(ds, g, 3 * f + 2, 7 * f + 2, one), ds, n, f, SampleMode::decimate);
  CHECK(std::abs(frame(3, 7) - 1.0) < 1e-15);
  CHECK(frame.cwiseAbs().sum() == doctest::Approx(1.0));

  // A width-2 source rendered through a one-PSF subspace equals the
  // block-averaged direct convolution.
  const PsfBank w2 = make_psf_bank({2.0}, 25);
  const PsfSubspace s2 = psf_subspace(w2, 1);
  RVector h(1);
  h << w2.psfs[0].norm();
  const Index r = 25, c = 24;
  const CMatrix got = smi_forward_spatial(source_coeffs(s2, g, r, c, h), s2, n, f, SampleMode::block_average);
  const RMatrix want = block_mean(convolve_delta(w2.psfs[0], g, r, c), f);
  CHECK((got.real() - want).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(got.imag().cwiseAbs().maxCoeff() == 0.0);

  // The (c, H) form is X = H diag(c).
  Sampler s(2);
  CMatrix hm = CMatrix::Zero(3, g * g);
  CVector cv = CVector::Zero(g * g);
  hm.col(700) = s.complex_normal_vector(3);
  hm.col(1900) = s.complex_normal_vector(3);
  cv(700) = 2.0;
  cv(1900) = cplx(0, -1);
  const CMatrix x = hm * cv.asDiagonal();
  CHECK((smi_forward_spatial(cv, hm, sub, n, f, SampleMode::decimate) -
         smi_forward_spatial(x, sub, n, f, SampleMode::decimate))
            .norm() == 0.0);
}

TEST_CASE("fourier operator") {
  const PsfSubspace& sub = default_subspace();
  Sampler s(3);
  for (SampleMode mode : {SampleMode::block_average, SampleMode::decimate}) {
    const SmiLift op(sub, 10, 5, mode);
    CHECK(op.rows() == 100);
    CHECK(op.atoms() == 2500);
    CHECK(op.forward(CMatrix::Zero(3, 2500)).norm() == 0.0);

    for (int t = 0; t < 20; ++t) {
      const CMatrix x = s.complex_normal_matrix(3, 2500);
      const CVector y = s.complex_normal_vector(100);
      const cplx lhs = inner(op.forward(x), y);
      const cplx rhs = inner(x, op.adjoint(y));
      CHECK(std::abs(lhs - rhs) <= 1e-8 * (x.norm() * y.norm()));
    }

    // Sources away from the border agree with the spatial model.
    for (int t = 0; t < 20; ++t) {
      const Index r = s.uniform_int(12, 37), c = s.uniform_int(12, 37);
      CMatrix x = CMatrix::Zero(3, 2500);
      x.col(r * 50 + c) = s.complex_normal_vector(3);
      const CVector fourier = op.forward(x);
      const CVector spatial = frame_to_vector(smi_forward_spatial(x, sub, 10, 5, mode));
      CHECK((fourier - spatial).norm() <= 1e-8 * spatial.norm());
    }
  }
  CHECK_THROWS_AS(SmiLift(sub, 4, 5, SampleMode::decimate), ParameterError);
  const SmiLift op(sub, 10, 5, SampleMode::decimate);
  CHECK_THROWS_AS(op.forward(CMatrix::Zero(3, 100)), ShapeError);
  CHECK_THROWS_AS(op.adjoint(CVector::Zero(99)), ShapeError);
}

TEST_CASE("frame vectorization is row-major") {
  CMatrix f(2, 3);
  f << 1, 2, 3, 4, 5, 6;
  const CVector v = frame_to_vector(f);
  CHECK(v(1) == cplx(2));
  CHECK(v(3) == cplx(4));
  CMatrix sq(2, 2);
  sq << 1, 2, 3, 4;
  CHECK(vector_to_frame(frame_to_vector(sq), 2) == sq);
}

TEST_CASE("synthetic stacks") {
  const PsfSubspace& sub = default_subspace();
  SynthOptions o;
  o.n = 12;
  o.factor = 5;
  const FrameStack empty = synth_stack({}, 3, sub, o);
  REQUIRE(empty.frames.size() == 3);
  for (const auto& f : empty.frames) CHECK(f.cwiseAbs().maxCoeff() == 0.0);

  o.sigma = 0.01;
  o.seed = 4;
  const auto src = random_sources(4, 2, 60, 12, 1.0, 4.0, 1.0, 9);
  CHECK(src.size() == 8);
  const FrameStack a = synth_stack(src, 4, sub, o);
  const FrameStack b = synth_stack(src, 4, sub, o);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a.frames[i] == b.frames[i]);
  CHECK(random_sources(4, 2, 60, 12, 1.0, 4.0, 1.0, 9).front().row == src.front().row);

  for (const auto& s : src) {
    CHECK(s.row >= 12);
    CHECK(s.row < 48);
    CHECK(s.width >= 1.0);
    CHECK(s.width <= 4.0);
  }

  std::vector<SourceRecord> bad{{0, 60, 3, 1.0, 2.0}};
  CHECK_THROWS_AS(synth_stack(bad, 1, sub, o), ParameterError);
  bad = {{2, 5, 5, 1.0, 2.0}};
  CHECK_THROWS_AS(synth_stack(bad, 1, sub, o), ParameterError);
  o.j_max = 1;
  bad = {{0, 5, 5, 1.0, 2.0}, {0, 20, 20, 1.0, 2.0}};
  CHECK_THROWS_AS(synth_stack(bad, 1, sub, o), ParameterError);
}

TEST_CASE("frame recovery") {
  const PsfSubspace& sub = default_subspace();
  const SmiLift op(sub, 12, 5, SampleMode::block_average);
  const FrameRecovery zero = recover_frame(RMatrix::Zero(12, 12), op, 0.1);
  CHECK(zero.support.empty());
  CHECK(zero.sources.empty());

  SUBCASE("single source at 40 dB lands within one high-res pixel") {
    Sampler s(5);
    for (int t = 0; t < 5; ++t) {
      const SourceRecord src{0, s.uniform_int(20, 39), s.uniform_int(20, 39), 1.0, 3.0};
      SynthOptions o;
      o.n = 12;
      const double peak = synth_stack({src}, 1, sub, o).frames[0].maxCoeff();
      o.sigma = 0.01 * peak;
      o.seed = 10 + static_cast<std::uint64_t>(t);
      const RMatrix frame = synth_stack({src}, 1, sub, o).frames[0];
      const FrameRecovery rec = recover_frame(frame, op, lambda_heuristic(frame, op, 0.2));
      REQUIRE_FALSE(rec.sources.empty());
      const Localization& best = rec.sources.front();
      CHECK(std::hypot(best.row - double(src.row), best.col - double(src.col)) <= 1.0);
      CHECK(rec.residual_norm < frame.norm());
    }
  }

  SUBCASE("a three-dimensional subspace fits a wide source better") {
    const PsfBank bank = make_psf_bank(default_psf_widths(), 25);
    const PsfSubspace s1 = psf_subspace(bank, 1);
    const SmiLift op1(s1, 12, 5, SampleMode::block_average);
    SynthOptions o;
    o.n = 12;
    const SourceRecord src{0, 30, 31, 1.0, 4.0};
    const RMatrix frame = synth_stack({src}, 1, sub, o).frames[0];
    const double lam = 1e-3 * frame.norm();
    const FrameRecovery r3 = recover_frame(frame, op, lam);
    const FrameRecovery r1 = recover_frame(frame, op1, lam);
    CHECK(r3.residual_norm < r1.residual_norm);
  }

  CHECK_THROWS_AS(recover_frame(RMatrix::Zero(11, 11), op, 0.1), ShapeError);
  CHECK_THROWS_AS(lambda_heuristic(RMatrix::Zero(12, 12), op, 0.0), ParameterError);
}

TEST_CASE("stack recovery is independent of the worker count") {
  const PsfSubspace& sub = default_subspace();
  const SmiLift op(sub, 10, 5, SampleMode::block_average);
  SynthOptions o;
  o.n = 10;
  o.sigma = 0.001;
  const auto src = random_sources(4, 1, 50, 13, 1.5, 3.0, 1.0, 3);
  const FrameStack stack = synth_stack(src, 4, sub, o);
  const auto a = recover_stack(stack, op, 0.2, true, {}, 1);
  const auto b = recover_stack(stack, op, 0.2, true, {}, 3);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i].support == b[i].support);
    CHECK(a[i].coefficients == b[i].coefficients);
  }
  CHECK(superimpose(a, 50) == superimpose(b, 50));
}

TEST_CASE("mean subtraction") {
  FrameStack st;
  st.frames = {RMatrix::Constant(2, 2, 1.0), RMatrix::Constant(2, 2, 3.0)};
  subtract_stack_mean(st);
  CHECK(st.frames[0](0, 0) == -1.0);
  CHECK(st.frames[1](1, 1) == 1.0);
}

TEST_CASE("superimpose") {
  CVector a(3), b(3);
  a << 3, 0, cplx(0, 4);
  b << 1, 0, 0;
  const RMatrix img1 = superimpose({single(7, a)}, 4);
  CHECK(img1(1, 3) == doctest::Approx(5.0));
  CHECK(img1.sum() == doctest::Approx(5.0));

  const RMatrix two = superimpose({single(7, a), single(12, b)}, 4);
  CHECK(two(1, 3) == doctest::Approx(5.0));
  CHECK(two(3, 0) == doctest::Approx(1.0));
  CHECK(two.sum() == doctest::Approx(6.0));

  Sampler s(6);
  std::vector<FrameRecovery> recs;
  for (int i = 0; i < 6; ++i) recs.push_back(single(s.uniform_int(0, 15), s.complex_normal_vector(3)));
  const RMatrix ref = superimpose(recs, 4);
  std::sort(recs.begin(), recs.end(),
            [](const FrameRecovery& x, const FrameRecovery& y) { return x.coefficients.norm() < y.coefficients.norm(); });
  do {
    CHECK(superimpose(recs, 4) == ref);
  } while (std::next_permutation(recs.begin(), recs.begin() + 3, [](const FrameRecovery& x, const FrameRecovery& y) {
    return x.coefficients.norm() < y.coefficients.norm();
  }));
  CHECK(superimpose({}, 4).sum() == 0.0);
  CHECK_THROWS_AS(superimpose({single(16, a)}, 4), ShapeError);
}

TEST_CASE("frame stack files") {
  FrameStack st;
  st.frames = {RMatrix::Zero(2, 3), RMatrix::Zero(2, 3)};
  st.frames[0] << 1.5, -2, 0.125, 1e-20, 3, 4;
  st.frames[1] << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  std::stringstream buf;
  write_fstack(buf, st);
  const FrameStack back = read_fstack(buf);
  REQUIRE(back.frames.size() == 2);
  CHECK(back.frames[0] == st.frames[0]);
  CHECK(back.frames[1] == st.frames[1]);

  auto parse_fails_at = [](const std::string& text, long line, long column) {
    std::istringstream in(text);
    try {
      read_fstack(in);
      FAIL("expected ParseError for: " << text);
    } catch (const ParseError& e) {
      CHECK(e.line == line);
      CHECK(e.column == column);
    }
  };
  parse_fails_at("FSTAK 1 2 2 1\n", 1, 1);
  parse_fails_at("FSTACK 2 2 2 1\n", 1, 8);
  parse_fails_at("FSTACK 1 2 x 1\n", 1, 12);
  parse_fails_at("FSTACK 1 2 2\n", 1, 13);
  parse_fails_at("FSTACK 1 2 2 1\n1 2\n3 q\n", 3, 3);
  parse_fails_at("FSTACK 1 2 2 1\n1 2\n3\n", 3, 2);
  parse_fails_at("FSTACK 1 2 2 1\n1 2\n", 3, 1);
  parse_fails_at("", 1, 1);

  const fs::path dir = fs::temp_directory_path() / "glift_smi_files";
  fs::create_directories(dir);
  save_fstack((dir / "s.fstack").string(), st);
  CHECK(load_fstack((dir / "s.fstack").string()).frames[1] == st.frames[1]);

  RMatrix img = RMatrix::Zero(3, 4);
  img(1, 2) = 2.0;
  img(0, 0) = -1.0;
  img(2, 3) = 1.0;
  write_pgm16((dir / "i.pgm").string(), img);
  std::ifstream in(dir / "i.pgm");
  std::string magic;
  int w = 0, h = 0, mx = 0;
  in >> magic >> w >> h >> mx;
  CHECK(magic == "P2");
  CHECK(w == 4);
  CHECK(h == 3);
  CHECK(mx == 65535);
  std::vector<int> px(12);
  for (int& v : px) in >> v;
  CHECK(px[0] == 0);
  CHECK(px[6] == 65535);
  CHECK(px[11] == 32768);
  if (png_available()) {
    write_png16((dir / "i.png").string(), img);
    std::ifstream png(dir / "i.png", std::ios::binary);
    char sig[8];
    png.read(sig, 8);
    CHECK(std::string(sig + 1, 3) == "PNG");
  }
  CHECK_THROWS_AS(load_fstack((dir / "missing.fstack").string()), IoError);
  fs::remove_all(dir);
}

}  // TEST_SUITE
