#include <set>
#include <tuple>

#include <doctest.h>

#include "bayeslista/bench.hpp"
#include "bayeslista/error.hpp"

using namespace bayeslista;

namespace {

ExperimentConfig tiny(Experiment e) {
  ExperimentConfig c = default_config(e);
  c.source = DataSource::kSynthetic;
  c.dim = 12;
  c.ks = {6};
  c.n_train = 20;
  c.n_test = 10;
  c.n_pool = 15;
  c.epochs = 2;
  c.pbp_epochs = 2;
  c.seeds = {0, 1};
  c.init_var_scale = 0.01;
  return c;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind{0};
}

}  // namespace

TEST_CASE("nmse") {
  const Eigen::MatrixXd truth = (Eigen::MatrixXd(2, 2) << 1, 0, 0, 2).finished();
  CHECK(nmse(truth, truth) == 0.0);
  CHECK(nmse(Eigen::MatrixXd::Zero(2, 2), truth) == doctest::Approx(1.0));
  const Eigen::MatrixXd pred = (Eigen::MatrixXd(2, 2) << 2, 0, 0, 2).finished();
  CHECK(nmse(pred, truth) == doctest::Approx(0.2));
  CHECK_THROWS_AS(nmse(pred, Eigen::MatrixXd::Zero(2, 2)), Error);
  CHECK_THROWS_AS(nmse(Eigen::MatrixXd::Zero(1, 2), truth), Error);
}

TEST_CASE("layer sweep emits one record per cell") {
  ExperimentConfig c = tiny(Experiment::kLayersSweep);
  c.layers = {1, 3};
  const auto records = run_experiment(c);
  CHECK(records.size() == 2 * 2 * 4);
  std::set<std::tuple<int, int, std::uint64_t>> cells;
  for (const RunRecord& r : records) {
    CHECK(r.experiment == Experiment::kLayersSweep);
    CHECK_FALSE(r.round.has_value());
    CHECK(r.nmse > 0.0);
    CHECK(r.nmse < 10.0);
    cells.insert({static_cast<int>(r.algorithm), r.layers, r.seed});
  }
  CHECK(cells.size() == records.size());
}

TEST_CASE("k sweep varies the observation size") {
  ExperimentConfig c = tiny(Experiment::kKSweep);
  c.ks = {4, 8};
  c.algorithms = {Algorithm::kIsta, Algorithm::kLista};
  const auto records = run_experiment(c);
  CHECK(records.size() == 2 * 2 * 2);
  std::set<int> ks;
  for (const RunRecord& r : records) ks.insert(r.k);
  CHECK(ks == std::set<int>{4, 8});
}

TEST_CASE("active learning emits every round of both strategies") {
  ExperimentConfig c = tiny(Experiment::kActive);
  c.rounds = 3;
  const auto records = run_experiment(c);
  CHECK(records.size() == 2 * 2 * 3);
  for (const RunRecord& r : records) {
    CHECK(r.algorithm == Algorithm::kBayesLista);
    REQUIRE(r.round.has_value());
    CHECK(*r.round >= 1);
    CHECK(*r.round <= 3);
    CHECK(r.strategy.has_value());
  }
}

TEST_CASE("sweeps are deterministic apart from timing") {
  ExperimentConfig c = tiny(Experiment::kLayersSweep);
  c.layers = {2};
  auto a = run_experiment(c);
  c.threads = 2;
  auto b = run_experiment(c);
  for (auto* v : {&a, &b}) {
    for (RunRecord& r : *v) r.wall_ms = 0.0;
  }
  CHECK(format_csv(a) == format_csv(b));
}

TEST_CASE("csv round trip") {
  std::vector<RunRecord> records(2);
  records[0] = {Experiment::kMnist, Algorithm::kLista, 4, 100, 3, 7, std::nullopt, 0.1234567890123, 12.5};
  records[1] = {Experiment::kActive, Algorithm::kBayesLista, 4, 100, 1, 2, Strategy::kRandom, 1.0 / 3.0, 0.0};
  const std::string text = format_csv(records);
  CHECK(text.rfind(csv_header(), 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
  const auto back = parse_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].nmse == records[0].nmse);
  CHECK(back[0].round == 7);
  CHECK_FALSE(back[0].strategy.has_value());
  CHECK(back[1].strategy == Strategy::kRandom);
  CHECK(back[1].nmse == records[1].nmse);
  CHECK(format_csv(back) == text);
  CHECK(csv_header(true).find("nmse_db") != std::string::npos);
  CHECK_THROWS_AS(parse_csv("bogus\n"), Error);
}

TEST_CASE("records sort by algorithm, K, L, seed") {
  std::vector<RunRecord> r(3);
  r[0] = {Experiment::kLayersSweep, Algorithm::kLista, 2, 50, 0, {}, {}, 0.0, 0.0};
  r[1] = {Experiment::kLayersSweep, Algorithm::kIsta, 4, 50, 1, {}, {}, 0.0, 0.0};
  r[2] = {Experiment::kLayersSweep, Algorithm::kIsta, 4, 50, 0, {}, {}, 0.0, 0.0};
  sort_records(r);
  CHECK(r[0].algorithm == Algorithm::kIsta);
  CHECK(r[0].seed == 0);
  CHECK(r[1].seed == 1);
  CHECK(r[2].algorithm == Algorithm::kLista);
}

TEST_CASE("options") {
  ExperimentConfig c = default_config(Experiment::kLayersSweep);
  set_option(c, "layers", "1..3");
  CHECK(c.layers == std::vector<int>{1, 2, 3});
  set_option(c, "seeds", "2,5");
  CHECK(c.seeds == std::vector<std::uint64_t>{2, 5});
  set_option(c, "repeats", "3");
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
  set_option(c, "algos", "fista,bayeslista");
  CHECK(c.algorithms == std::vector<Algorithm>{Algorithm::kFista, Algorithm::kBayesLista});
  set_option(c, "epochs", "7");
  CHECK(c.epochs == 7);
  CHECK(c.pbp_epochs == 7);
  set_option(c, "variance-guard", "clamp");
  CHECK(c.guard == VarianceGuard::kClamp);
  set_option(c, "init", "random");
  CHECK_FALSE(c.warm_start);
  validate(c);

  CHECK(kind_of([&] { set_option(c, "no-such-key", "1"); }) == ErrorKind::kConfig);
  CHECK(kind_of([&] { set_option(c, "layers", "1,x"); }) == ErrorKind::kConfig);
  CHECK(kind_of([&] { set_option(c, "algos", "lasso"); }) == ErrorKind::kConfig);
  CHECK(kind_of([&] { set_option(c, "layers", "4..1"); }) == ErrorKind::kConfig);

  ExperimentConfig bad = default_config(Experiment::kActive);
  bad.rounds = bad.n_pool + 1;
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::kConfig);
  bad = default_config(Experiment::kLayersSweep);
  bad.lambda = -1.0;
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::kConfig);
}

TEST_CASE("published defaults") {
  const ExperimentConfig l = default_config(Experiment::kLayersSweep);
  CHECK(l.dim == 100);
  CHECK(l.ks == std::vector<int>{50});
  CHECK(l.n_train == 1000);
  CHECK(l.n_test == 100);
  CHECK(l.noise_sd == 0.5);
  CHECK(l.lambda == 0.1);
  const ExperimentConfig a = default_config(Experiment::kActive);
  CHECK(a.n_train == 50);
  CHECK(a.n_pool == 500);
  CHECK(a.n_test == 100);
  CHECK(a.rounds == 10);
  CHECK(a.seeds.size() == 20);
}

TEST_CASE("uncertainty selection") {
  PbpState q = pbp_init(4, 3, 0.1, 1, 0);
  SUBCASE("pool of one") {
    CHECK(select_most_uncertain(q, Eigen::MatrixXd::Ones(1, 3), MomentMode::kPrinted) == 0);
  }
  SUBCASE("ties go to the lowest index") {
    CHECK(select_most_uncertain(q, Eigen::MatrixXd::Ones(4, 3), MomentMode::kPrinted) == 0);
  }
  SUBCASE("larger inputs are more uncertain") {
    Eigen::MatrixXd pool = Eigen::MatrixXd::Ones(3, 3);
    pool.row(2) *= 10.0;
    CHECK(select_most_uncertain(q, pool, MomentMode::kPrinted) == 2);
  }
  CHECK_THROWS_AS(select_most_uncertain(q, Eigen::MatrixXd(0, 3), MomentMode::kPrinted), Error);
}
