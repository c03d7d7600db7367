#include <sstream>

#include "doctest.h"

#include "bgmm/errors.hpp"
#include "bgmm/study.hpp"

using namespace bgmm;
using nlohmann::json;

namespace {

json small_config() {
  return json::parse(R"({
    "family": "longitudinal-gaussian", "n": 150, "s": 3, "p": 4,
    "theta0": [1.0, -1.0, 0.0, 0.0], "rho": 0.3, "sigma": 1.0,
    "replications": 4, "seed": 77,
    "sampler": {"n_iter": 3000, "burn_in": 500, "thin": 5, "sigma_add": 0.3}
  })");
}

std::string csv(const StudyReport& r) {
  std::ostringstream out;
  write_report_csv(out, r);
  return out.str();
}

}  // namespace

TEST_CASE("config parsing fills defaults and pads theta0_leading") {
  json j = small_config();
  j.erase("theta0");
  j["p"] = 6;
  j["theta0_leading"] = {0.5, -0.5};
  const StudyConfig c = parse_study_config(j);
  REQUIRE(c.theta0.size() == 6);
  CHECK(c.theta0(0) == 0.5);
  CHECK(c.theta0(1) == -0.5);
  CHECK(c.theta0.tail(4).isZero());
  CHECK(c.model_prior == ModelPrior::Kind::size_uniform);
  CHECK(c.param_prior.sigma == 10.0);
  CHECK(c.dimension() == 6);
}

TEST_CASE("config parsing rejects bad input") {
  SUBCASE("unknown top-level key") {
    json j = small_config();
    j["replicates"] = 3;
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
  SUBCASE("unknown sampler key") {
    json j = small_config();
    j["sampler"]["iters"] = 3;
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
  SUBCASE("theta0 length mismatch") {
    json j = small_config();
    j["p"] = 5;
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
  SUBCASE("both theta0 forms") {
    json j = small_config();
    j["theta0_leading"] = {1.0};
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
  SUBCASE("rho outside the exchangeable range") {
    json j = small_config();
    j["rho"] = -0.6;
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
  SUBCASE("wrong type") {
    json j = small_config();
    j["n"] = "many";
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
  SUBCASE("unknown family") {
    json j = small_config();
    j["family"] = "poisson";
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
  SUBCASE("omega0 not positive definite") {
    const json j = json::parse(R"({"family":"partial-correlation","n":100,"omega0":[[1,2],[2,1]]})");
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
  SUBCASE("burn-in beyond chain length") {
    json j = small_config();
    j["sampler"]["burn_in"] = 5000;
    CHECK_THROWS_AS(parse_study_config(j), ConfigError);
  }
}

TEST_CASE("model prior aliases") {
  json j = small_config();
  j["priors"] = {{"model", {{"kind", "pim1"}}}};
  CHECK(parse_study_config(j).model_prior == ModelPrior::Kind::uniform);
  j["priors"] = {{"model", {{"kind", "pim2"}}}};
  CHECK(parse_study_config(j).model_prior == ModelPrior::Kind::size_uniform);
}

TEST_CASE("config survives a JSON round trip") {
  for (const char* text :
       {R"({"family":"longitudinal-binary","n":80,"s":4,"p":5,"theta0_leading":[1,-1],"rho":0.2,"feasibility":"strict"})",
        R"({"family":"quantile","n":120,"p":3,"theta0":[1,0,0.5],"tau":0.25,"noise":{"kind":"laplace","scale":2}})",
        R"({"family":"partial-correlation","n":100,"omega0":[[1,0.4],[0.4,1]]})"}) {
    const StudyConfig a = parse_study_config(json::parse(text));
    const StudyConfig b = parse_study_config(to_json(a));
    CHECK(to_json(a) == to_json(b));
    CHECK(b.truth().isApprox(a.truth()));
  }
}

TEST_CASE("partial-correlation config takes dimensions from omega0") {
  const StudyConfig c =
      parse_study_config(json::parse(R"({"family":"partial-correlation","n":100,"omega0":[[2,0.5,0],[0.5,2,0],[0,0,1]]})"));
  CHECK(c.s == 3);
  CHECK(c.dimension() == 6);
  CHECK(c.truth().size() == 6);
}

TEST_CASE("selection metrics examples") {
  const ModelIndex all = ModelIndex::full(6);
  const ModelIndex truth = ModelIndex::from_indices(6, {0, 1, 2});
  auto m = selection_metrics(truth, truth, all);
  CHECK(m.ex == 1);
  CHECK(m.tp == 3);
  CHECK(m.fp == 0);
  m = selection_metrics(ModelIndex::from_indices(6, {0, 1, 2, 4}), truth, all);
  CHECK(m.ov == 1);
  CHECK(m.fp == 1);
  m = selection_metrics(ModelIndex::from_indices(6, {0, 1, 4}), truth, all);
  CHECK(m.un == 1);
  CHECK(m.tp == 2);
  CHECK(m.fp == 1);
}

TEST_CASE("selection outcomes are exhaustive and exclusive") {
  const std::size_t p = 5;
  const ModelIndex all = ModelIndex::full(p);
  const auto models = enumerate_models(all, ModelIndex(p), true);
  for (const auto& truth : models)
    for (const auto& sel : models) {
      const auto m = selection_metrics(sel, truth, all);
      CHECK(m.ex + m.un + m.ov == 1);
      CHECK(m.tp + m.fp == sel.size());
      CHECK(m.tp <= truth.size());
    }
}

TEST_CASE("replications are reproducible in isolation") {
  const StudyConfig c = parse_study_config(small_config());
  const auto a = run_replication(c, 2);
  const auto b = run_replication(c, 2);
  REQUIRE(a.ok);
  CHECK(a.seed == derive_seed(c.seed, 2));
  CHECK(a.map_model == b.map_model);
  CHECK(a.mse == b.mse);
  CHECK(a.map_prob == b.map_prob);
  const auto other = run_replication(c, 3);
  CHECK(other.seed != a.seed);
}

TEST_CASE("study reports do not depend on the thread count") {
  const StudyConfig c = parse_study_config(small_config());
  const auto one = run_study(c, 1);
  const auto again = run_study(c, 1);
  const auto four = run_study(c, 4);
  CHECK(csv(one) == csv(again));
  CHECK(csv(one) == csv(four));
  CHECK(to_json(one).dump() == to_json(four).dump());
  CHECK(one.failures == 0);
}

TEST_CASE("a strong signal selects the true model") {
  json j = small_config();
  j["replications"] = 1;
  j["n"] = 300;
  const StudyReport r = run_study(parse_study_config(j), 1);
  REQUIRE(r.rows.size() == 1);
  REQUIRE(r.rows[0].ok);
  CHECK(r.rows[0].map_model == ModelIndex::from_indices(4, {0, 1}));
  CHECK(r.aggregate("ex").mean == 1.0);
  CHECK(r.aggregate("un").mean == 0.0);
  CHECK(r.aggregate("ov").mean == 0.0);
  CHECK(r.rows[0].map_prob > 0.5);
  CHECK(r.rows[0].true_prob == r.rows[0].map_prob);
  CHECK(r.rows[0].oracle_mse <= r.rows[0].naive_mse);
  CHECK(std::isfinite(r.rows[0].pmse));
}

TEST_CASE("report CSV layout") {
  const StudyReport r = run_study(parse_study_config(small_config()), 2);
  std::istringstream in(csv(r));
  std::string header, line;
  std::getline(in, header);
  CHECK(header ==
        "replication,seed,status,map_model,map_size,ex,un,ov,tp,fp,mse,pmse,map_prob,true_prob,naive_mse,oracle_mse,"
        "naive_pmse,oracle_pmse,sigma_add,between_acceptance,within_acceptance,clamped_pairs,error");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 22);
    ++rows;
  }
  CHECK(rows == 4);
  const json j = to_json(r);
  CHECK(j["schema_version"] == kReportSchemaVersion);
  CHECK(j["aggregates"].contains("ex"));
  CHECK(j["replications"] == 4);
}

TEST_CASE("failed replications are recorded and excluded") {
  json j = small_config();
  j["family"] = "longitudinal-binary";
  j["theta0"] = {3.0, -3.0, 0.0, 0.0};
  j["rho"] = 0.9;
  j["feasibility"] = "strict";
  j.erase("sigma");
  const StudyReport r = run_study(parse_study_config(j), 2);
  CHECK(r.failures == r.rows.size());
  CHECK(r.aggregate("ex").count == 0);
  for (const auto& row : r.rows) {
    CHECK_FALSE(row.ok);
    CHECK_FALSE(row.error.empty());
  }
  CHECK(csv(r).find("failed") != std::string::npos);
}

TEST_CASE("oracle MSE scales like 1/n") {
  json j = small_config();
  j["replications"] = 50;
  j["sampler"] = {{"n_iter", 200}, {"burn_in", 0}, {"thin", 1}, {"sigma_add", 0.3}};
  j["n"] = 200;
  const double small = run_study(parse_study_config(j), 0).aggregate("oracle_mse").mean;
  j["n"] = 400;
  const double large = run_study(parse_study_config(j), 0).aggregate("oracle_mse").mean;
  const double ratio = large / small;
  CHECK(ratio >= 0.35);
  CHECK(ratio <= 0.7);
}

TEST_CASE("MAP model is insensitive to the add-move scale") {
  json j = small_config();
  j["p"] = 6;
  j["theta0"] = {1.0, -0.8, 0.5, 0.0, 0.0, 0.0};
  j["n"] = 250;
  j["sampler"] = {{"n_iter", 8000}, {"burn_in", 1000}, {"thin", 5}, {"sigma_add", 0.1}};
  ModelIndex first;
  for (double sd : {0.05, 0.1, 0.2, 0.4}) {
    j["sampler"]["sigma_add"] = sd;
    const auto row = run_replication(parse_study_config(j), 0);
    REQUIRE(row.ok);
    if (first.dimension() == 0) first = row.map_model;
    CHECK(row.map_model == first);
  }
}

TEST_CASE("pilot grid picks one of its candidates") {
  json j = small_config();
  j["sampler"]["pilot_grid"] = {0.05, 0.3, 1.0};
  const auto row = run_replication(parse_study_config(j), 0);
  REQUIRE(row.ok);
  const bool in_grid = row.sigma_add == 0.05 || row.sigma_add == 0.3 || row.sigma_add == 1.0;
  CHECK(in_grid);
}
