#include "mad/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mad/errors.hpp"

namespace mad {

using Json = nlohmann::ordered_json;

namespace {

// Reads typed fields out of one JSON object and rejects anything left over.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ValidationError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  T get(const char* key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <class T>
  T require(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ValidationError(path(key) + ": required");
    return convert<T>(j_.at(key), key);
  }

  const Json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ValidationError(path(k.c_str()) + ": unknown key");
  }

  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  template <class T>
  T convert(const Json& v, const char* key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(path(key) + ": expected true/false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError(path(key) + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError(path(key) + ": expected a number");
      return v.get<double>();
    } else {
      if (!v.is_number_unsigned())
        throw ValidationError(path(key) + ": expected a non-negative integer");
      return v.get<T>();
    }
  }

  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

DatasetSpec parse_dataset(const Json& j) {
  Fields f(j, "dataset");
  DatasetSpec spec;
  const std::string kind = f.require<std::string>("kind");
  spec.seed = f.get<std::uint64_t>("seed", 0);
  if (kind == "discrete_uniform") {
    spec.kind = DiscreteUniform{f.get<std::size_t>("n_coords", 8)};
  } else if (kind == "discrete_skewed") {
    spec.kind = DiscreteSkewed{f.get<std::size_t>("n_coords", 8), f.get<double>("decay", kDefaultDecay)};
  } else if (kind == "vmf_mixture") {
    const int n = static_cast<int>(f.get<std::size_t>("manifold_n", 2));
    VmfMixture mix{n, {}};
    if (f.has("components")) {
      const Json& comps = f.raw("components");
      if (!comps.is_array()) throw ValidationError("dataset.components: expected an array");
      for (const Json& c : comps) {
        Fields cf(c, "dataset.components[]");
        VmfComponent comp;
        const Json& mean = cf.raw("mean");
        if (!mean.is_array()) throw ValidationError("dataset.components[].mean: expected an array");
        for (const Json& v : mean) {
          if (!v.is_number()) throw ValidationError("dataset.components[].mean: expected numbers");
          comp.mean.push_back(v.get<double>());
        }
        comp.kappa = cf.require<double>("kappa");
        comp.weight = cf.require<double>("weight");
        cf.finish();
        mix.components.push_back(std::move(comp));
      }
      if (f.has("random_components"))
        throw ValidationError("dataset: give either components or random_components, not both");
    } else {
      const std::size_t k = f.get<std::size_t>("random_components", 4);
      const double kappa = f.get<double>("kappa", 20.0);
      if (n != 2 && n != 3) throw ValidationError("dataset.manifold_n: must be 2 or 3");
      if (!(kappa > 0.0)) throw ValidationError("dataset.kappa: must be positive");
      mix = random_vmf_mixture(n, k, kappa, spec.seed);
    }
    if (f.get<bool>("antipodal", false)) mix = antipodal_symmetrize(mix);
    spec.kind = std::move(mix);
  } else if (kind == "latlon_file") {
    spec.kind = LatLonFile{f.require<std::string>("path")};
  } else {
    throw ValidationError("dataset.kind: unknown kind '" + kind + "'");
  }
  f.finish();
  return spec;
}

Json dataset_json(const DatasetSpec& spec) {
  Json j;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, DiscreteUniform>) {
          j["kind"] = "discrete_uniform";
          j["n_coords"] = k.n_coords;
        } else if constexpr (std::is_same_v<T, DiscreteSkewed>) {
          j["kind"] = "discrete_skewed";
          j["n_coords"] = k.n_coords;
          j["decay"] = k.decay;
        } else if constexpr (std::is_same_v<T, VmfMixture>) {
          j["kind"] = "vmf_mixture";
          j["manifold_n"] = k.manifold_n;
          Json comps = Json::array();
          for (const auto& c : k.components) {
            Json cj;
            cj["mean"] = c.mean;
            cj["kappa"] = c.kappa;
            cj["weight"] = c.weight;
            comps.push_back(std::move(cj));
          }
          j["components"] = std::move(comps);
          j["antipodal"] = false;
        } else {
          j["kind"] = "latlon_file";
          j["path"] = k.path.string();
        }
      },
      spec.kind);
  j["seed"] = spec.seed;
  return j;
}

}  // namespace

Manifold RunConfig::resolve_manifold() const {
  if (manifold == "auto") return support_of(dataset);
  if (manifold == "discrete") {
    const Manifold m = support_of(dataset);
    if (!m.is_discrete()) throw ValidationError("manifold: 'discrete' needs a discrete dataset");
    return m;
  }
  if (manifold.rfind("sphere:", 0) == 0) {
    int n = 0;
    try {
      std::size_t used = 0;
      n = std::stoi(manifold.substr(7), &used);
      if (used != manifold.size() - 7) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("manifold: bad sphere dimension in '" + manifold + "'");
    }
    if (n < 1) throw ValidationError("manifold: sphere dimension must be >= 1");
    return Manifold::sphere(n);
  }
  if (manifold == "rotations") return Manifold::rotations();
  if (manifold.rfind("rotations:", 0) == 0) {
    try {
      return Manifold::rotations(parse_symmetry_group(manifold.substr(10)));
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError(std::string("manifold: ") + e.what());
    }
  }
  throw ValidationError("manifold: unknown manifold '" + manifold + "'");
}

void RunConfig::validate() const {
  dataset.validate();
  const Manifold m = resolve_manifold();
  const Manifold support = support_of(dataset);
  if (m.ambient_dim() != support.ambient_dim())
    throw ValidationError("manifold: ambient dimension " + std::to_string(m.ambient_dim()) +
                          " does not match the dataset's " + std::to_string(support.ambient_dim()));
  if (model.input_dim != m.ambient_dim())
    throw ValidationError("model.input_dim: must equal the ambient dimension " +
                          std::to_string(m.ambient_dim()));
  try {
    model.validate();
    (void)schedule.build();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(e.what());
  }
  if (training.steps == 0) throw ValidationError("training.steps: must be positive");
  if (training.batch_size == 0) throw ValidationError("training.batch_size: must be positive");
  if (!(training.lr > 0.0) || !std::isfinite(training.lr))
    throw ValidationError("training.lr: must be positive");
  if (output_dir.empty()) throw ValidationError("output_dir: must not be empty");
}

std::string RunConfig::to_json() const {
  Json j;
  j["manifold"] = manifold;
  j["dataset"] = dataset_json(dataset);
  j["schedule"] = {{"sigma_min", schedule.sigma_min},
                   {"sigma_max", schedule.sigma_max},
                   {"num_scales", schedule.num_scales}};
  j["model"] = {{"input_dim", model.input_dim},
                {"hidden_dim", model.hidden_dim},
                {"num_hidden_layers", model.num_hidden_layers},
                {"activation", std::string(to_string(model.activation))},
                {"sigma_embedding", std::string(to_string(model.sigma_embedding))},
                {"fourier_dim", model.fourier_dim},
                {"antisymmetrize", model.antisymmetrize}};
  j["training"] = {{"loss", std::string(to_string(training.loss))},
                   {"steps", training.steps},
                   {"batch_size", training.batch_size},
                   {"lr", training.lr},
                   {"seed", training.seed}};
  j["sampling"] = {{"n", sampling.n}, {"project", sampling.project}, {"seed", sampling.seed}};
  j["output_dir"] = output_dir.string();
  return j.dump(2) + "\n";
}

RunConfig RunConfig::parse(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  RunConfig c;
  Fields f(j, "config");
  c.manifold = f.get<std::string>("manifold", "auto");
  if (!f.has("dataset")) throw ValidationError("config.dataset: required");
  c.dataset = parse_dataset(f.raw("dataset"));
  const Manifold m = c.resolve_manifold();

  if (f.has("schedule")) {
    Fields s(f.raw("schedule"), "schedule");
    c.schedule.sigma_min = s.get<double>("sigma_min", c.schedule.sigma_min);
    c.schedule.sigma_max = s.get<double>("sigma_max", c.schedule.sigma_max);
    c.schedule.num_scales = s.get<std::size_t>("num_scales", c.schedule.num_scales);
    s.finish();
  }
  c.model.input_dim = m.ambient_dim();
  if (f.has("model")) {
    Fields s(f.raw("model"), "model");
    c.model.input_dim = s.get<std::size_t>("input_dim", c.model.input_dim);
    c.model.hidden_dim = s.get<std::size_t>("hidden_dim", c.model.hidden_dim);
    c.model.num_hidden_layers = s.get<std::size_t>("num_hidden_layers", c.model.num_hidden_layers);
    try {
      if (s.has("activation")) c.model.activation = parse_activation(s.get<std::string>("activation", ""));
      if (s.has("sigma_embedding"))
        c.model.sigma_embedding = parse_sigma_embedding(s.get<std::string>("sigma_embedding", ""));
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError(std::string("model: ") + e.what());
    }
    c.model.fourier_dim = s.get<std::size_t>("fourier_dim", c.model.fourier_dim);
    c.model.antisymmetrize = s.get<bool>("antisymmetrize", c.model.antisymmetrize);
    s.finish();
  }
  if (f.has("training")) {
    Fields s(f.raw("training"), "training");
    try {
      if (s.has("loss")) c.training.loss = parse_loss_kind(s.get<std::string>("loss", ""));
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError(std::string("training.loss: ") + e.what());
    }
    c.training.steps = s.get<std::size_t>("steps", c.training.steps);
    c.training.batch_size = s.get<std::size_t>("batch_size", c.training.batch_size);
    c.training.lr = s.get<double>("lr", c.training.lr);
    c.training.seed = s.get<std::uint64_t>("seed", c.training.seed);
    s.finish();
  }
  if (f.has("sampling")) {
    Fields s(f.raw("sampling"), "sampling");
    c.sampling.n = s.get<std::size_t>("n", c.sampling.n);
    c.sampling.project = s.get<bool>("project", c.sampling.project);
    c.sampling.seed = s.get<std::uint64_t>("seed", c.sampling.seed);
    s.finish();
  }
  c.output_dir = f.get<std::string>("output_dir", c.output_dir.string());
  f.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "config.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config.to_json();
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace mad
