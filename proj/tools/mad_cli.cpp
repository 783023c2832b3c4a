// mad: data generation, training, sampling, evaluation and oracle checks.
//
// Exit codes: 0 success, 1 validation error, 2 runtime abort, 3 oracle failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mad/basescore.hpp"
#include "mad/data.hpp"
#include "mad/errors.hpp"
#include "mad/eval.hpp"
#include "mad/net.hpp"
#include "mad/run_config.hpp"

namespace fs = std::filesystem;
using namespace mad;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitOracle = 3;

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(what + ": bad number '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError(what + ": empty list");
  return out;
}

fs::path output_dir(const RunConfig& config, const std::optional<std::string>& out) {
  const fs::path dir = out ? fs::path(*out) : config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  void attach(CLI::App* app, bool config_required) {
    auto* opt = app->add_option("--config", config, "run config (JSON)");
    if (config_required) opt->required();
    app->add_option("--seed", seed, "seed override");
    app->add_option("--out", out, "output directory");
  }
};

// make-data ------------------------------------------------------------------

int cmd_make_data(const Common& common, std::size_t n) {
  RunConfig config = RunConfig::load(*common.config);
  if (common.seed) config.dataset.seed = *common.seed;
  config.validate();
  const fs::path dir = output_dir(config, common.out);
  config.output_dir = dir;

  const SampleBatch batch = generate(config.dataset, n);
  write_samples_csv(dir / "data.csv", batch.points);
  write_resolved_config(config, dir);
  nlohmann::ordered_json meta;
  meta["dataset"] = config.dataset.describe();
  meta["seed"] = config.dataset.seed;
  meta["n"] = batch.size();
  meta["dim"] = batch.dim();
  write_text(dir / "data.json", meta.dump(2) + "\n");
  std::cout << "wrote " << batch.size() << " rows to " << (dir / "data.csv").string() << "\n";
  return kExitOk;
}

// train ----------------------------------------------------------------------

int cmd_train(const Common& common) {
  RunConfig config = RunConfig::load(*common.config);
  if (common.seed) config.training.seed = *common.seed;
  config.validate();
  const fs::path dir = output_dir(config, common.out);
  config.output_dir = dir;
  write_resolved_config(config, dir);

  const Manifold manifold = config.resolve_manifold();
  const NoiseSchedule schedule = config.schedule.build();
  const TrainResult result =
      train(config.model, config.training, sampler_for(config.dataset), schedule, manifold);

  save_checkpoint(dir / "checkpoint.bin", Checkpoint{config.model, config.training.loss, result.params});
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
    csv += std::to_string(i + 1) + "," + format_double(result.loss_curve[i]) + "\n";
  write_text(dir / "loss.csv", csv);
  std::cout << "trained " << result.loss_curve.size() << " steps, final loss "
            << format_double(result.loss_curve.back()) << "\n";
  return kExitOk;
}

// sample ---------------------------------------------------------------------

int cmd_sample(const Common& common, const std::string& checkpoint_path, std::optional<std::size_t> n,
               bool project) {
  const fs::path ckpt_path(checkpoint_path);
  const fs::path config_path =
      common.config ? fs::path(*common.config) : ckpt_path.parent_path() / "config.json";
  RunConfig config = RunConfig::load(config_path);
  if (common.seed) config.sampling.seed = *common.seed;
  if (n) config.sampling.n = *n;
  if (project) config.sampling.project = true;
  config.validate();

  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Manifold manifold = config.resolve_manifold();
  if (ckpt.config.input_dim != manifold.ambient_dim())
    throw ValidationError("checkpoint " + ckpt_path.string() + " has input dimension " +
                          std::to_string(ckpt.config.input_dim) + " but the manifold " +
                          manifold.describe() + " lives in R^" + std::to_string(manifold.ambient_dim()));
  if (!(ckpt.config == config.model))
    throw ValidationError("checkpoint " + ckpt_path.string() + " does not match the model in " +
                          config_path.string());
  config.training.loss = ckpt.loss;

  const fs::path dir = output_dir(config, common.out);
  config.output_dir = dir;
  write_resolved_config(config, dir);

  const ScoreField field = model_score_field(std::move(ckpt.params), ckpt.config, ckpt.loss, manifold);
  Rng rng(config.sampling.seed);
  const SamplingResult res = reverse_sample(field, config.schedule.build(), config.sampling.n, manifold,
                                            rng, config.sampling.project);
  write_samples_csv(dir / "samples.csv", res.batch.points);

  MetricReport drift;
  drift.name = "manifold_drift";
  drift.value = res.drift.mean;
  drift.config["max"] = format_double(res.drift.max);
  drift.config["checkpoint"] = ckpt_path.string();
  drift.config["loss"] = std::string(to_string(config.training.loss));
  drift.config["n"] = std::to_string(config.sampling.n);
  drift.config["project"] = config.sampling.project ? "true" : "false";
  drift.config["seed"] = std::to_string(config.sampling.seed);
  drift.config["stage"] = "pre_projection";
  append_report(dir / "metrics.jsonl", drift);
  std::cout << "wrote " << config.sampling.n << " samples to " << (dir / "samples.csv").string()
            << ", mean drift " << format_double(res.drift.mean) << "\n";
  return kExitOk;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string metric;
  std::string samples;
  std::optional<std::string> reference;
  std::optional<double> bandwidth;
  std::optional<std::string> ground_truth;
  std::string group = "identity";
};

int cmd_eval(const Common& common, const EvalArgs& args) {
  const Matrix samples = read_samples_csv(args.samples);
  if (samples.empty()) throw ValidationError("eval: " + args.samples + " has no rows");
  MetricReport report;
  if (args.metric == "mmd") {
    if (!args.reference) throw ValidationError("eval mmd: --reference is required");
    const Matrix reference = read_samples_csv(*args.reference);
    if (reference.empty()) throw ValidationError("eval: " + *args.reference + " has no rows");
    report = mmd(samples, reference, args.bandwidth);
    report.config["reference"] = *args.reference;
  } else if (args.metric == "tv") {
    if (!common.config) throw ValidationError("eval tv: --config with a discrete dataset is required");
    const RunConfig config = RunConfig::load(*common.config);
    const std::vector<double> pmf = target_pmf(config.dataset);
    if (pmf.empty()) throw ValidationError("eval tv: the dataset is not discrete");
    report = discrete_tv(samples, support_of(config.dataset).points(), pmf);
    report.config["dataset"] = config.dataset.describe();
  } else if (args.metric == "spread") {
    if (!args.ground_truth) throw ValidationError("eval spread: --ground-truth w,x,y,z is required");
    if (samples.cols() != 4) throw ValidationError("eval spread: samples must have 4 columns (w,x,y,z)");
    const std::vector<double> gt = parse_list(*args.ground_truth, "--ground-truth");
    if (gt.size() != 4) throw ValidationError("--ground-truth: expected 4 numbers");
    std::vector<Quaternion> qs;
    for (std::size_t i = 0; i < samples.rows(); ++i) qs.push_back(Quaternion::from_vector(samples.row(i)));
    report = spread(qs, Quaternion::from_vector(gt), parse_symmetry_group(args.group));
  } else if (args.metric == "drift") {
    report = manifold_drift(samples);
  } else {
    throw ValidationError("eval: unknown metric '" + args.metric + "'");
  }
  report.config["samples"] = args.samples;
  const fs::path dir = common.out ? fs::path(*common.out) : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  append_report(dir / "metrics.jsonl", report);
  std::printf("%s\n", format_double(report.value).c_str());
  return kExitOk;
}

// oracle-check ---------------------------------------------------------------

struct OracleArgs {
  std::string manifold = "sphere:2";
  std::string formula = "auto";
  std::string norms = "0.5,1.0,1.5";
  std::string sigmas = "0.3,0.6,1.0";
  std::optional<std::string> direction;
  std::string points = "-1,0;1,0";
  std::size_t n_mc = 1000000;
  bool negate = false;
};

Manifold oracle_manifold(const OracleArgs& args) {
  if (args.manifold == "discrete") {
    Matrix pts;
    std::stringstream ss(args.points);
    std::string row;
    std::size_t dim = 0;
    std::vector<Vector> rows;
    while (std::getline(ss, row, ';')) {
      rows.push_back(parse_list(row, "--points"));
      if (dim == 0) dim = rows.back().size();
      if (rows.back().size() != dim) throw ValidationError("--points: rows differ in length");
    }
    return Manifold::discrete(Matrix::from_rows(rows, dim));
  }
  if (args.manifold.rfind("sphere:", 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(args.manifold.substr(7));
    } catch (const std::exception&) {
      throw ValidationError("--manifold: bad sphere dimension");
    }
    return Manifold::sphere(n);
  }
  throw ValidationError("--manifold: expected sphere:N or discrete");
}

int cmd_oracle_check(const Common& common, const OracleArgs& args) {
  const Manifold manifold = oracle_manifold(args);
  ClosedFormScore closed = base_score;
  if (args.formula == "nsphere") {
    if (!manifold.is_spherical()) throw ValidationError("--formula nsphere needs a sphere");
    closed = base_score_nsphere;
  } else if (args.formula != "auto") {
    throw ValidationError("--formula: expected auto or nsphere");
  }
  const std::vector<double> norms = parse_list(args.norms, "--norms");
  const std::vector<double> sigmas = parse_list(args.sigmas, "--sigmas");
  for (double s : sigmas)
    if (!(s > 0.0)) throw ValidationError("--sigmas: must be positive");
  for (double r : norms)
    if (!(r > 0.0)) throw ValidationError("--norms: must be positive");

  const std::size_t d = manifold.ambient_dim();
  Vector dir(d);
  if (args.direction) {
    dir = parse_list(*args.direction, "--direction");
    if (dir.size() != d) throw ValidationError("--direction: expected " + std::to_string(d) + " numbers");
  } else {
    // A generic direction that avoids the coordinate axes.
    for (std::size_t i = 0; i < d; ++i) dir[i] = 1.0 + 0.5 * static_cast<double>(i);
  }
  const double dn = norm(dir);
  if (!(dn > 0.0)) throw ValidationError("--direction: must be nonzero");
  for (double& v : dir) v *= (args.negate ? -1.0 : 1.0) / dn;

  const std::uint64_t seed = common.seed.value_or(0);
  std::printf("# manifold=%s formula=%s n_mc=%zu seed=%llu\n", manifold.describe().c_str(),
              args.formula.c_str(), args.n_mc, static_cast<unsigned long long>(seed));
  std::printf("%8s %8s %13s %13s %12s  %s  %s\n", "norm", "sigma", "rel_err", "rel_se", "ess", "status",
              "closed_form");
  int failures = 0;
  std::size_t cell_index = 0;
  for (double r : norms) {
    for (double s : sigmas) {
      Vector x(d);
      for (std::size_t i = 0; i < d; ++i) x[i] = r * dir[i];
      const OracleCell cell = oracle_cell(manifold, x, s, args.n_mc, derive_seed(seed, cell_index++), closed);
      std::string cf;
      for (std::size_t i = 0; i < cell.closed_form.size(); ++i)
        cf += (i ? "," : "") + format_double(cell.closed_form[i]);
      if (cell.status == OracleStatus::kInconclusive) {
        std::printf("%8.4g %8.4g %13s %13s %12.1f  %s  %s\n", r, s, "-", "-", cell.ess,
                    std::string(to_string(cell.status)).c_str(), cf.c_str());
      } else {
        std::printf("%8.4g %8.4g %13.4e %13.4e %12.1f  %s  %s\n", r, s, cell.rel_error, cell.max_rel_se,
                    cell.ess, std::string(to_string(cell.status)).c_str(), cf.c_str());
      }
      if (cell.status == OracleStatus::kFail) ++failures;
    }
  }
  if (failures > 0) {
    std::fprintf(stderr, "oracle-check: %d cell(s) failed\n", failures);
    return kExitOracle;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold-aware score-based diffusion toolkit"};
  app.require_subcommand(1);

  Common common;
  std::size_t n_data = 10000;
  auto* make_data = app.add_subcommand("make-data", "generate a dataset CSV from a run config");
  common.attach(make_data, true);
  make_data->add_option("--n", n_data, "number of rows (ignored for lat/lon files)");

  auto* train_cmd = app.add_subcommand("train", "train a score model");
  common.attach(train_cmd, true);

  std::string checkpoint;
  std::optional<std::size_t> n_samples;
  bool project = false;
  auto* sample = app.add_subcommand("sample", "draw samples from a trained model");
  common.attach(sample, false);
  sample->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  sample->add_option("--n", n_samples, "number of samples");
  sample->add_flag("--project", project, "project the final samples onto the manifold");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "compute a metric and append it to metrics.jsonl");
  common.attach(eval, false);
  eval->add_option("--metric", eval_args.metric, "mmd | tv | spread | drift")
      ->required()
      ->check(CLI::IsMember({"mmd", "tv", "spread", "drift"}));
  eval->add_option("--samples", eval_args.samples, "sample CSV")->required();
  eval->add_option("--reference", eval_args.reference, "reference CSV (mmd)");
  eval->add_option("--bandwidth", eval_args.bandwidth, "fixed Gaussian bandwidth (mmd)");
  eval->add_option("--ground-truth", eval_args.ground_truth, "w,x,y,z (spread)");
  eval->add_option("--group", eval_args.group, "symmetry group (spread)");

  OracleArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle-check", "compare closed-form base scores with Monte Carlo");
  common.attach(oracle, false);
  oracle->add_option("--manifold", oracle_args.manifold, "sphere:N or discrete");
  oracle->add_option("--formula", oracle_args.formula, "auto or nsphere");
  oracle->add_option("--norms", oracle_args.norms, "comma-separated query norms");
  oracle->add_option("--sigmas", oracle_args.sigmas, "comma-separated noise levels");
  oracle->add_option("--direction", oracle_args.direction, "query direction (default generic)");
  oracle->add_option("--points", oracle_args.points, "discrete support, rows separated by ';'");
  oracle->add_option("--n-mc", oracle_args.n_mc, "Monte-Carlo samples per cell");
  oracle->add_flag("--negate", oracle_args.negate, "query -x instead of x");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*make_data) return cmd_make_data(common, n_data);
    if (*train_cmd) return cmd_train(common);
    if (*sample) return cmd_sample(common, checkpoint, n_samples, project);
    if (*eval) return cmd_eval(common, eval_args);
    if (*oracle) return cmd_oracle_check(common, oracle_args);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DegenerateInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
