#include "mad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mad/errors.hpp"
#include "mad/eval.hpp"
#include "mad/random.hpp"

namespace mad {

Matrix circle_points(std::size_t n_coords) {
  if (n_coords < 2) throw ValidationError("circle_points: need at least 2 points");
  Matrix pts(n_coords, 2);
  for (std::size_t i = 0; i < n_coords; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_coords);
    pts(i, 0) = std::cos(t);
    pts(i, 1) = std::sin(t);
  }
  return pts;
}

std::vector<double> skewed_pmf(std::size_t n_coords, double decay) {
  if (n_coords < 2) throw ValidationError("skewed_pmf: need at least 2 points");
  if (!(decay > 0.0)) throw ValidationError("skewed_pmf: decay must be positive");
  const std::size_t peak = n_coords / 4;
  std::vector<double> p(n_coords);
  double total = 0.0;
  for (std::size_t i = 0; i < n_coords; ++i) {
    const std::size_t off = i > peak ? i - peak : peak - i;
    const std::size_t d = std::min(off, n_coords - off);
    p[i] = std::exp(-decay * static_cast<double>(d));
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

void validate_pmf(std::span<const double> pmf) {
  if (pmf.empty()) throw ValidationError("pmf is empty");
  double total = 0.0;
  for (double v : pmf) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("pmf has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("pmf does not sum to 1");
}

namespace {

template <class Engine>
std::size_t draw_index(std::span<const double> cdf, Engine& engine) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(engine) * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  // Never land on a zero-probability tail entry.
  std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  while (idx > 0 && cdf[idx] == cdf[idx - 1]) --idx;
  return idx;
}

std::vector<double> cumulative(std::span<const double> w) {
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) cdf[i] = acc += w[i];
  return cdf;
}

template <class Engine>
Vector vmf_draw(std::span<const double> mean, double kappa, Engine& engine) {
  if (!(kappa > 0.0)) throw ValidationError("vMF concentration must be positive");
  const std::size_t d = mean.size();
  const double dm1 = static_cast<double>(d - 1);
  // Wood (1994), with b written to avoid cancellation at large kappa.
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log1p(-x0 * x0);
  std::gamma_distribution<double> gamma(dm1 / 2.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double w = 0.0;
  for (;;) {
    const double g1 = gamma(engine);
    const double g2 = gamma(engine);
    const double z = g1 / (g1 + g2);
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = unif(engine);
    if (kappa * w + dm1 * std::log1p(-x0 * w) - c >= std::log(u)) break;
  }
  // Uniform direction in the tangent space at the mean.
  Vector v(d);
  double vn = 0.0;
  do {
    fill_normal(engine, std::span<double>(v));
    const double proj = dot(v, mean);
    for (std::size_t i = 0; i < d; ++i) v[i] -= proj * mean[i];
    vn = norm(v);
  } while (vn < 1e-12);
  const double s = std::sqrt(std::max(0.0, (1.0 - w) * (1.0 + w)));
  Vector x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = w * mean[i] + s * v[i] / vn;
  const double xn = norm(x);
  for (double& xi : x) xi /= xn;
  return x;
}

template <class Engine>
Vector mixture_draw(const VmfMixture& mixture, const std::vector<double>& cdf, Engine& engine) {
  const VmfComponent& comp = mixture.components[draw_index(cdf, engine)];
  return vmf_draw(comp.mean, comp.kappa, engine);
}

std::vector<double> mixture_weights(const VmfMixture& m) {
  std::vector<double> w;
  for (const auto& c : m.components) w.push_back(c.weight);
  return w;
}

}  // namespace

SampleBatch sample_discrete(const Matrix& points, std::span<const double> pmf, std::size_t n,
                            std::uint64_t seed) {
  if (pmf.size() != points.rows()) throw ValidationError("sample_discrete: one probability per point");
  validate_pmf(pmf);
  const std::vector<double> cdf = cumulative(pmf);
  SampleBatch out;
  out.points = Matrix(n, points.cols());
  out.sigmas.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    SplitMix64 engine(derive_seed(seed, r));
    const auto src = points.row(draw_index(cdf, engine));
    std::copy(src.begin(), src.end(), out.points.row(r).begin());
  }
  return out;
}

void VmfMixture::validate() const {
  if (manifold_n != 2 && manifold_n != 3)
    throw ValidationError("vMF mixture: manifold_n must be 2 or 3, got " + std::to_string(manifold_n));
  if (components.empty()) throw ValidationError("vMF mixture: no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (c.mean.size() != static_cast<std::size_t>(manifold_n + 1))
      throw ValidationError("vMF mixture: mean has wrong dimension");
    if (std::abs(norm(c.mean) - 1.0) > 1e-9) throw ValidationError("vMF mixture: mean is not unit norm");
    if (!(c.kappa > 0.0) || !std::isfinite(c.kappa))
      throw ValidationError("vMF mixture: kappa must be positive");
    if (!(c.weight >= 0.0)) throw ValidationError("vMF mixture: negative weight");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("vMF mixture: weights must sum to 1");
}

VmfMixture antipodal_symmetrize(const VmfMixture& mixture) {
  VmfMixture out{mixture.manifold_n, {}};
  for (const auto& c : mixture.components) {
    Vector neg(c.mean.size());
    std::transform(c.mean.begin(), c.mean.end(), neg.begin(), [](double v) { return -v; });
    out.components.push_back({c.mean, c.kappa, 0.5 * c.weight});
    out.components.push_back({std::move(neg), c.kappa, 0.5 * c.weight});
  }
  return out;
}

VmfMixture random_vmf_mixture(int manifold_n, std::size_t k, double kappa, std::uint64_t seed) {
  if (k == 0) throw ValidationError("random_vmf_mixture: need at least one component");
  VmfMixture m{manifold_n, {}};
  SplitMix64 engine(derive_seed(seed, 0x3f));
  for (std::size_t i = 0; i < k; ++i) {
    Vector mean(static_cast<std::size_t>(manifold_n + 1));
    double nrm = 0.0;
    do {
      fill_normal(engine, std::span<double>(mean));
      nrm = norm(mean);
    } while (nrm < 1e-12);
    for (double& v : mean) v /= nrm;
    m.components.push_back({std::move(mean), kappa, 1.0 / static_cast<double>(k)});
  }
  m.validate();
  return m;
}

Vector sample_vmf(std::span<const double> mean, double kappa, SplitMix64& engine) {
  return vmf_draw(mean, kappa, engine);
}
Vector sample_vmf(std::span<const double> mean, double kappa, Rng& engine) {
  return vmf_draw(mean, kappa, engine);
}

SampleBatch sample_vmf_mixture(const VmfMixture& mixture, std::size_t n, std::uint64_t seed) {
  mixture.validate();
  const std::vector<double> cdf = cumulative(mixture_weights(mixture));
  SampleBatch out;
  out.points = Matrix(n, static_cast<std::size_t>(mixture.manifold_n + 1));
  out.sigmas.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    SplitMix64 engine(derive_seed(seed, r));
    const Vector x = mixture_draw(mixture, cdf, engine);
    std::copy(x.begin(), x.end(), out.points.row(r).begin());
  }
  return out;
}

Vector latlon_to_unit(double lat_deg, double lon_deg) {
  // Exact values at the poles and on the axes.
  constexpr double kDeg = std::numbers::pi / 180.0;
  const auto cos_deg = [&](double a) {
    if (a == 90.0 || a == -90.0) return 0.0;
    return std::cos(a * kDeg);
  };
  const auto sin_deg = [&](double a) {
    if (a == 180.0 || a == -180.0 || a == 0.0) return 0.0;
    if (a == 90.0) return 1.0;
    if (a == -90.0) return -1.0;
    return std::sin(a * kDeg);
  };
  const double cl = cos_deg(lat_deg);
  return {cl * cos_deg(lon_deg), cl * sin_deg(lon_deg), sin_deg(lat_deg)};
}

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

SampleBatch load_latlon_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  const std::string where = path.string() + ":";
  if (!std::getline(in, line)) throw ParseError(where + "1: missing header \"lat,lon\"", 1);
  ++lineno;
  strip_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != "lat,lon") throw ParseError(where + "1: expected header \"lat,lon\"", 1);

  SampleBatch out;
  out.points = Matrix(0, 3);
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    const std::string at = where + std::to_string(lineno) + ": ";
    const auto fields = split_commas(line);
    if (fields.size() != 2)
      throw ParseError(at + "expected 2 fields, got " + std::to_string(fields.size()), lineno);
    double lat = 0.0, lon = 0.0;
    if (!parse_double(fields[0], lat)) throw ParseError(at + "bad latitude '" + fields[0] + "'", lineno);
    if (!parse_double(fields[1], lon)) throw ParseError(at + "bad longitude '" + fields[1] + "'", lineno);
    if (lat < -90.0 || lat > 90.0) throw ParseError(at + "latitude out of [-90, 90]", lineno);
    if (lon < -180.0 || lon > 180.0) throw ParseError(at + "longitude out of [-180, 180]", lineno);
    out.points.append_row(latlon_to_unit(lat, lon));
  }
  out.sigmas.assign(out.points.rows(), 0.0);
  return out;
}

void write_samples_csv(const std::filesystem::path& path, const Matrix& points) {
  std::string text;
  for (std::size_t j = 0; j < points.cols(); ++j) {
    if (j) text += ',';
    text += "x" + std::to_string(j);
  }
  text += '\n';
  char buf[40];
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t j = 0; j < points.cols(); ++j) {
      if (j) text += ',';
      std::snprintf(buf, sizeof buf, "%.17g", points(i, j));
      text += buf;
    }
    text += '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

Matrix read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  const std::string where = path.string() + ":";
  if (!std::getline(in, line)) throw ParseError(where + "1: missing header", 1);
  strip_cr(line);
  const auto header = split_commas(line);
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] != "x" + std::to_string(j))
      throw ParseError(where + "1: expected header x0,...,x{d-1}", 1);
  Matrix out(0, header.size());
  Vector row(header.size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    const auto fields = split_commas(line);
    if (fields.size() != header.size())
      throw ParseError(where + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(fields.size()),
                       lineno);
    for (std::size_t j = 0; j < fields.size(); ++j)
      if (!parse_double(fields[j], row[j]))
        throw ParseError(where + std::to_string(lineno) + ": bad number '" + fields[j] + "'", lineno);
    out.append_row(row);
  }
  return out;
}

void DatasetSpec::validate() const {
  std::visit(
      [](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, DiscreteUniform>) {
          if (k.n_coords < 2) throw ValidationError("dataset: n_coords must be >= 2");
        } else if constexpr (std::is_same_v<T, DiscreteSkewed>) {
          if (k.n_coords < 2) throw ValidationError("dataset: n_coords must be >= 2");
          if (!(k.decay > 0.0)) throw ValidationError("dataset: decay must be positive");
        } else if constexpr (std::is_same_v<T, VmfMixture>) {
          k.validate();
        } else {
          if (k.path.empty()) throw ValidationError("dataset: lat/lon path is empty");
        }
      },
      kind);
}

std::string DatasetSpec::describe() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, DiscreteUniform>) {
          return "discrete_uniform(" + std::to_string(k.n_coords) + ")";
        } else if constexpr (std::is_same_v<T, DiscreteSkewed>) {
          return "discrete_skewed(" + std::to_string(k.n_coords) + ", " + format_double(k.decay) + ")";
        } else if constexpr (std::is_same_v<T, VmfMixture>) {
          return "vmf_mixture(S^" + std::to_string(k.manifold_n) + ", " +
                 std::to_string(k.components.size()) + " components)";
        } else {
          return "latlon_file(" + k.path.string() + ")";
        }
      },
      kind);
}

std::vector<double> target_pmf(const DatasetSpec& spec) {
  if (const auto* u = std::get_if<DiscreteUniform>(&spec.kind))
    return std::vector<double>(u->n_coords, 1.0 / static_cast<double>(u->n_coords));
  if (const auto* s = std::get_if<DiscreteSkewed>(&spec.kind)) return skewed_pmf(s->n_coords, s->decay);
  return {};
}

SampleBatch generate(const DatasetSpec& spec, std::size_t n) {
  spec.validate();
  if (const auto* m = std::get_if<VmfMixture>(&spec.kind)) return sample_vmf_mixture(*m, n, spec.seed);
  if (const auto* f = std::get_if<LatLonFile>(&spec.kind)) {
    (void)n;
    return load_latlon_csv(f->path);
  }
  const std::size_t count = std::holds_alternative<DiscreteUniform>(spec.kind)
                                ? std::get<DiscreteUniform>(spec.kind).n_coords
                                : std::get<DiscreteSkewed>(spec.kind).n_coords;
  return sample_discrete(circle_points(count), target_pmf(spec), n, spec.seed);
}

Manifold support_of(const DatasetSpec& spec) {
  if (const auto* m = std::get_if<VmfMixture>(&spec.kind)) return Manifold::sphere(m->manifold_n);
  if (std::holds_alternative<LatLonFile>(spec.kind)) return Manifold::sphere(2);
  const std::size_t count = std::holds_alternative<DiscreteUniform>(spec.kind)
                                ? std::get<DiscreteUniform>(spec.kind).n_coords
                                : std::get<DiscreteSkewed>(spec.kind).n_coords;
  return Manifold::discrete(circle_points(count));
}

DataSampler sampler_for(const DatasetSpec& spec) {
  spec.validate();
  if (const auto* m = std::get_if<VmfMixture>(&spec.kind)) {
    auto cdf = cumulative(mixture_weights(*m));
    return [mix = *m, cdf = std::move(cdf)](std::size_t n, Rng& rng) {
      Matrix out(n, static_cast<std::size_t>(mix.manifold_n + 1));
      for (std::size_t r = 0; r < n; ++r) {
        const Vector x = mixture_draw(mix, cdf, rng);
        std::copy(x.begin(), x.end(), out.row(r).begin());
      }
      return out;
    };
  }
  if (const auto* f = std::get_if<LatLonFile>(&spec.kind)) {
    SampleBatch data = load_latlon_csv(f->path);
    if (data.size() == 0) throw ValidationError("dataset: " + f->path.string() + " has no rows");
    return resample_rows(std::move(data.points));
  }
  const Matrix pts = support_of(spec).points();
  auto cdf = cumulative(target_pmf(spec));
  return [pts, cdf = std::move(cdf)](std::size_t n, Rng& rng) {
    Matrix out(n, pts.cols());
    for (std::size_t r = 0; r < n; ++r) {
      const auto src = pts.row(draw_index(cdf, rng));
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  };
}

}  // namespace mad
