#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "mad/errors.hpp"
#include "mad/run_config.hpp"

using namespace mad;

namespace {

std::string with(const std::string& extra) {
  return R"({"dataset": {"kind": "discrete_skewed", "n_coords": 8})" + extra + "}";
}

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const RunConfig c = RunConfig::parse(with(""));
  CHECK(c.manifold == "auto");
  CHECK(c.resolve_manifold().is_discrete());
  CHECK(c.model.input_dim == 2);
  CHECK(c.model.hidden_dim == 128);
  CHECK(c.model.num_hidden_layers == 3);
  CHECK(c.schedule.sigma_min == 1e-4);
  CHECK(c.schedule.sigma_max == 2.0);
  CHECK(c.schedule.num_scales == 100);
  CHECK(c.training.loss == LossKind::kMad);
  CHECK(c.training.steps == 2000);
  CHECK(c.training.batch_size == 512);
  CHECK(c.sampling.n == 10000);
  CHECK_FALSE(c.sampling.project);
  const auto* k = std::get_if<DiscreteSkewed>(&c.dataset.kind);
  REQUIRE(k != nullptr);
  CHECK(k->decay == kDefaultDecay);
}

TEST_CASE("full config parses") {
  const RunConfig c = RunConfig::parse(R"({
    "manifold": "rotations:tetrahedral",
    "dataset": {"kind": "vmf_mixture", "manifold_n": 3, "random_components": 2, "kappa": 10,
                "antipodal": true, "seed": 4},
    "schedule": {"sigma_min": 0.001, "sigma_max": 3, "num_scales": 50},
    "model": {"hidden_dim": 16, "num_hidden_layers": 2, "activation": "relu",
              "sigma_embedding": "fourier", "fourier_dim": 8, "antisymmetrize": true},
    "training": {"loss": "dsm", "steps": 10, "batch_size": 32, "lr": 0.01, "seed": 9},
    "sampling": {"n": 5, "project": true, "seed": 2},
    "output_dir": "runs/a"
  })");
  CHECK(c.resolve_manifold().sphere_dim() == 3);
  CHECK(c.model.input_dim == 4);
  CHECK(c.model.activation == Activation::kRelu);
  CHECK(c.model.sigma_embedding == SigmaEmbedding::kFourier);
  CHECK(c.model.antisymmetrize);
  CHECK(c.training.loss == LossKind::kDsm);
  CHECK(c.training.lr == 0.01);
  CHECK(c.schedule.num_scales == 50);
  CHECK(c.sampling.project);
  CHECK(c.output_dir == "runs/a");
  const auto* mix = std::get_if<VmfMixture>(&c.dataset.kind);
  REQUIRE(mix != nullptr);
  CHECK(mix->components.size() == 4);
}

TEST_CASE("resolved config re-emits the same bytes") {
  for (const std::string& text :
       {with(""), with(R"(, "training": {"lr": 0.0007, "steps": 3})"),
        std::string(R"({"dataset": {"kind": "vmf_mixture", "manifold_n": 2, "random_components": 3,
                        "antipodal": true}, "schedule": {"sigma_max": 0.1}})"),
        std::string(R"({"dataset": {"kind": "latlon_file", "path": "events.csv"}, "manifold": "sphere:2"})"),
        std::string(R"({"dataset": {"kind": "vmf_mixture", "manifold_n": 3,
                        "components": [{"mean": [0, 0, 0, 1], "kappa": 5, "weight": 1}]}})")}) {
    const std::string first = RunConfig::parse(text).to_json();
    const RunConfig again = RunConfig::parse(first);
    CHECK(again.to_json() == first);
    CHECK(first.back() == '\n');
  }
}

TEST_CASE("random mixtures are materialized deterministically") {
  const std::string text =
      R"({"dataset": {"kind": "vmf_mixture", "manifold_n": 3, "random_components": 4, "seed": 7}})";
  CHECK(RunConfig::parse(text).to_json() == RunConfig::parse(text).to_json());
  CHECK(RunConfig::parse(text).to_json().find("\"components\"") != std::string::npos);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(RunConfig::parse("{"), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse("[]"), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse("{}"), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "bogus": 1)")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "training": {"stepz": 1})")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "training": {"steps": -1})")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "training": {"steps": 0})")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "training": {"lr": "fast"})")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "training": {"loss": "l2"})")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "model": {"input_dim": 3})")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "model": {"activation": "tanh"})")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "schedule": {"sigma_min": 3})")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "manifold": "sphere:2")")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(with(R"(, "manifold": "torus")")), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(R"({"dataset": {"kind": "mystery"}})"), ValidationError);
  CHECK_THROWS_AS(RunConfig::parse(R"({"dataset": {"kind": "discrete_skewed", "decay": 0}})"),
                  ValidationError);
  CHECK_THROWS_AS(
      RunConfig::parse(R"({"dataset": {"kind": "vmf_mixture", "manifold_n": 2,
                          "components": [{"mean": [0, 0, 2], "kappa": 5, "weight": 1}]}})"),
      ValidationError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/config.json"), ValidationError);
}

TEST_CASE("write_resolved_config") {
  const auto dir = std::filesystem::temp_directory_path() / "mad_test_run_config";
  std::filesystem::remove_all(dir);
  const RunConfig c = RunConfig::parse(with(""));
  write_resolved_config(c, dir);
  std::ifstream in(dir / "config.json", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == c.to_json());
  CHECK(RunConfig::load(dir / "config.json").to_json() == c.to_json());
}
