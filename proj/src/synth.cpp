#include "glift/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "glift/rng.hpp"
#include "glift/theory.hpp"

namespace glift {

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::dft_first_k: return "dft-first-k";
    case BasisKind::identity_first_k: return "identity-first-k";
    case BasisKind::random_orthonormal: return "random-orthonormal";
  }
  return "unknown";
}

BasisKind parse_basis_kind(const std::string& name) {
  if (name == "dft-first-k" || name == "dft") return BasisKind::dft_first_k;
  if (name == "identity-first-k" || name == "identity") return BasisKind::identity_first_k;
  if (name == "random-orthonormal" || name == "random") return BasisKind::random_orthonormal;
  throw ConfigError("unknown basis kind '" + name + "'");
}

void InstanceParams::validate() const {
  if (n < 1 || m < 1 || k < 1 || j < 0) throw ParameterError("instance dimensions must be positive");
  if (j > m) throw ParameterError("sparsity J must not exceed M");
  if (k >= n) throw ParameterError("subspace dimension K must be smaller than N");
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be nonnegative");
  if (gamma_target && !(*gamma_target > 0.0)) throw ParameterError("gamma_target must be positive");
}

Instance gen_instance(const InstanceParams& p) {
  p.validate();
  Sampler sampler(p.seed, p.stream);

  Dictionary dict = Dictionary::gaussian(p.n, p.m, sampler);
  SubspaceBasis basis = [&] {
    switch (p.basis) {
      case BasisKind::dft_first_k: return SubspaceBasis::dft_first_k(p.n, p.k);
      case BasisKind::identity_first_k: return SubspaceBasis::identity_first_k(p.n, p.k);
      case BasisKind::random_orthonormal: return SubspaceBasis::random_orthonormal(p.n, p.k, sampler);
    }
    throw ParameterError("unknown basis kind");
  }();
  const double mu = coherence(basis);

  Instance inst;
  inst.params = p;
  inst.support = sampler.sample_without_replacement(p.m, p.j);
  inst.x0 = CMatrix::Zero(p.k, p.m);
  for (Index col : inst.support) {
    const cplx c = sampler.complex_normal();
    const CVector h = sampler.complex_normal_vector(p.k);
    inst.x0.col(col) = c * h;
  }

  if (p.gamma_target && p.j > 0) {
    BoundInputs b{.n = p.n, .m = p.m, .k = p.k, .j = p.j, .sigma = p.sigma, .mu_max = mu};
    if (p.j >= p.m) throw DomainError("gamma_target requires J < M");
    const double g0 = gamma_zero(b);
    if (!(g0 > 0.0)) throw DomainError("gamma_target requires gamma_0 > 0 (sigma must be positive)");
    double min_norm = std::numeric_limits<double>::infinity();
    for (Index col : inst.support) min_norm = std::min(min_norm, inst.x0.col(col).norm());
    inst.x0 *= (g0 / *p.gamma_target) / min_norm;
  }

  inst.noise = p.sigma > 0.0 ? sampler.complex_normal_vector(p.n, p.sigma) : CVector::Zero(p.n);
  inst.op = std::make_shared<DirectLift>(std::move(dict), std::move(basis), p.exec);
  inst.y = inst.op->forward(inst.x0);
  if (p.sigma > 0.0) inst.y += inst.noise;
  return inst;
}

SupportSet extract_support(const CMatrix& x, double rel_threshold) {
  if (!(rel_threshold >= 0.0 && rel_threshold < 1.0)) {
    throw ParameterError("rel_threshold must lie in [0, 1)");
  }
  SupportSet out;
  if (x.cols() == 0) return out;
  const RVector norms = column_norms(x);
  const double top = norms.maxCoeff();
  if (top == 0.0) return out;
  for (Index j = 0; j < x.cols(); ++j) {
    if (norms(j) > rel_threshold * top) out.push_back(j);
  }
  return out;
}

double l2inf_error(const CMatrix& xhat, const CMatrix& x0) {
  if (xhat.rows() != x0.rows() || xhat.cols() != x0.cols()) {
    throw ShapeError("l2inf_error: shape mismatch");
  }
  return norm_2inf(xhat - x0);
}

SupportMetrics support_metrics(const CMatrix& xhat, const CMatrix& x0, const SupportSet& truth,
                               double rel_threshold) {
  SupportMetrics m;
  m.recovered_support = extract_support(xhat, rel_threshold);
  m.exact = m.recovered_support == truth;
  m.l2inf_error = l2inf_error(xhat, x0);
  return m;
}

// ---------------------------------------------------------------------------
// Binary container

namespace {

constexpr char kMagic[8] = {'G', 'L', 'I', 'F', 'T', 'I', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}
  void u32(std::uint32_t v) { bytes(v, 4); }
  void u64(std::uint64_t v) { bytes(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void c128(cplx v) {
    f64(v.real());
    f64(v.imag());
  }

 private:
  void bytes(std::uint64_t v, int count) {
    char buf[8];
    for (int i = 0; i < count; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, count);
  }
  std::ostream& out_;
};

class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(bytes(4)); }
  std::uint64_t u64() { return bytes(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  cplx c128() {
    const double re = f64();
    const double im = f64();
    return {re, im};
  }

 private:
  std::uint64_t bytes(int count) {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), count);
    if (in_.gcount() != count) throw IoError("instance file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < count; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
};

}  // namespace

void write_instance(std::ostream& out, const Instance& inst) {
  const InstanceParams& p = inst.params;
  if (!inst.op->dictionary().is_real()) throw ParameterError("only real dictionaries are stored");
  out.write(kMagic, sizeof kMagic);
  LeWriter w(out);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(p.basis));
  w.u64(static_cast<std::uint64_t>(p.n));
  w.u64(static_cast<std::uint64_t>(p.m));
  w.u64(static_cast<std::uint64_t>(p.k));
  w.u64(static_cast<std::uint64_t>(p.j));
  w.u64(p.seed);
  w.u64(p.stream);
  w.f64(p.sigma);
  w.f64(p.gamma_target ? *p.gamma_target : std::numeric_limits<double>::quiet_NaN());
  const RMatrix& a = inst.op->dictionary().real_entries();
  for (Index c = 0; c < a.cols(); ++c)
    for (Index r = 0; r < a.rows(); ++r) w.f64(a(r, c));
  const CMatrix& b = inst.op->basis().columns();
  for (Index c = 0; c < b.cols(); ++c)
    for (Index r = 0; r < b.rows(); ++r) w.c128(b(r, c));
  for (Index c = 0; c < inst.x0.cols(); ++c)
    for (Index r = 0; r < inst.x0.rows(); ++r) w.c128(inst.x0(r, c));
  for (Index s : inst.support) w.u64(static_cast<std::uint64_t>(s));
  for (Index i = 0; i < inst.noise.size(); ++i) w.c128(inst.noise(i));
  for (Index i = 0; i < inst.y.size(); ++i) w.c128(inst.y(i));
  if (!out) throw IoError("failed writing instance");
}

Instance read_instance(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != 8 || !std::equal(magic, magic + 8, kMagic)) {
    throw IoError("not a glift instance file (bad magic)");
  }
  LeReader r(in);
  if (const auto v = r.u32(); v != kVersion) {
    throw IoError("unsupported instance version " + std::to_string(v));
  }
  Instance inst;
  InstanceParams& p = inst.params;
  const auto kind = r.u32();
  if (kind > 2) throw IoError("bad basis kind in instance file");
  p.basis = static_cast<BasisKind>(kind);
  p.n = static_cast<Index>(r.u64());
  p.m = static_cast<Index>(r.u64());
  p.k = static_cast<Index>(r.u64());
  p.j = static_cast<Index>(r.u64());
  p.seed = r.u64();
  p.stream = r.u64();
  p.sigma = r.f64();
  if (const double g = r.f64(); !std::isnan(g)) p.gamma_target = g;
  p.validate();
  RMatrix a(p.n, p.m);
  for (Index c = 0; c < p.m; ++c)
    for (Index i = 0; i < p.n; ++i) a(i, c) = r.f64();
  CMatrix b(p.n, p.k);
  for (Index c = 0; c < p.k; ++c)
    for (Index i = 0; i < p.n; ++i) b(i, c) = r.c128();
  inst.x0.resize(p.k, p.m);
  for (Index c = 0; c < p.m; ++c)
    for (Index i = 0; i < p.k; ++i) inst.x0(i, c) = r.c128();
  inst.support.resize(static_cast<std::size_t>(p.j));
  for (auto& s : inst.support) s = static_cast<Index>(r.u64());
  inst.noise.resize(p.n);
  for (Index i = 0; i < p.n; ++i) inst.noise(i) = r.c128();
  inst.y.resize(p.n);
  for (Index i = 0; i < p.n; ++i) inst.y(i) = r.c128();
  inst.op = std::make_shared<DirectLift>(Dictionary(a), SubspaceBasis(std::move(b)), p.exec);
  return inst;
}

void save_instance(const std::string& path, const Instance& inst) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_instance(out, inst);
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_instance(in);
}

}  // namespace glift
