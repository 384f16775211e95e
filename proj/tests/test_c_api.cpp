#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "bayeslista/bayeslista.h"

namespace {

std::string tmp_path(const char* name) { return std::string(BAYESLISTA_TEST_TMP) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("version and errors") {
  CHECK(std::strlen(bl_version()) > 0);
  double o, m, v;
  CHECK(bl_soft_threshold_gauss(0.0, -1.0, 0.1, &o, &m, &v) == BL_INVALID_ARGUMENT);
  CHECK(std::strlen(bl_last_error()) > 0);
  CHECK(bl_soft_threshold_gauss(0.0, 1.0, 0.1, nullptr, &m, &v) == BL_INVALID_ARGUMENT);
  REQUIRE(bl_soft_threshold_gauss(2.0, 0.0, 0.5, &o, &m, &v) == BL_OK);
  CHECK(o == 0.0);
  CHECK(m == doctest::Approx(1.5));
  CHECK(std::strlen(bl_last_error()) == 0);
}

TEST_CASE("dataset lifecycle") {
  bl_dataset* ds = nullptr;
  REQUIRE(bl_dataset_generate(30, 8, 5, 0.7, 0.1, 0.1, 4, &ds) == BL_OK);
  size_t n, dim, k;
  REQUIRE(bl_dataset_shape(ds, &n, &dim, &k) == BL_OK);
  CHECK(n == 30);
  CHECK(dim == 8);
  CHECK(k == 5);
  std::vector<double> y(k), beta(dim), y2(k), beta2(dim);
  REQUIRE(bl_dataset_row(ds, 3, y.data(), beta.data()) == BL_OK);
  CHECK(bl_dataset_row(ds, 30, y.data(), beta.data()) == BL_INVALID_ARGUMENT);

  const std::string path = tmp_path("c_api.ssld");
  REQUIRE(bl_dataset_save(ds, path.c_str()) == BL_OK);
  bl_dataset* back = nullptr;
  REQUIRE(bl_dataset_load(path.c_str(), &back) == BL_OK);
  REQUIRE(bl_dataset_row(back, 3, y2.data(), beta2.data()) == BL_OK);
  CHECK(y == y2);
  CHECK(beta == beta2);
  bl_dataset_destroy(back);
  CHECK(bl_dataset_load(tmp_path("absent.ssld").c_str(), &back) == BL_DATA_ERROR);
  CHECK(bl_dataset_from_mnist(tmp_path("absent.idx").c_str(), 5, 10, 0, 0, &back) == BL_DATA_ERROR);
  bl_dataset_destroy(ds);
  bl_dataset_destroy(nullptr);
}

TEST_CASE("model training and prediction") {
  bl_dataset* ds = nullptr;
  REQUIRE(bl_dataset_generate(60, 10, 6, 0.7, 0.1, 0.1, 1, &ds) == BL_OK);
  bl_model* m = nullptr;
  REQUIRE(bl_model_create_warm(ds, 0.1, 2, 0.01, &m) == BL_OK);
  REQUIRE(bl_model_train(m, ds, 3, 0) == BL_OK);
  std::vector<double> y(6), beta(10), mean(10), var(10);
  REQUIRE(bl_dataset_row(ds, 0, y.data(), beta.data()) == BL_OK);
  REQUIRE(bl_model_predict(m, y.data(), mean.data(), var.data()) == BL_OK);
  for (double v : var) CHECK(v >= 0.0);
  REQUIRE(bl_model_set_exact_moments(m, 1) == BL_OK);
  REQUIRE(bl_model_predict(m, y.data(), mean.data(), var.data()) == BL_OK);
  CHECK(bl_model_train(m, ds, 0, 0) == BL_INVALID_ARGUMENT);
  bl_model_destroy(m);

  REQUIRE(bl_model_create(4, 6, 0.1, 1, 0, &m) == BL_OK);
  CHECK(bl_model_train(m, ds, 1, 0) == BL_INVALID_ARGUMENT);
  bl_model_destroy(m);
  CHECK(bl_model_create(4, 6, -0.1, 1, 0, &m) == BL_INVALID_ARGUMENT);
  bl_dataset_destroy(ds);
}

TEST_CASE("experiment runs") {
  bl_config* cfg = nullptr;
  CHECK(bl_config_create("nonsense", &cfg) == BL_CONFIG_ERROR);
  REQUIRE(bl_config_create("layers-sweep", &cfg) == BL_OK);
  CHECK(bl_config_set(cfg, "no-such-key", "1") == BL_CONFIG_ERROR);
  for (auto [key, value] : std::vector<std::pair<const char*, const char*>>{
           {"layers", "1,2"}, {"d", "12"}, {"k", "6"}, {"n-train", "20"}, {"n-test", "10"},
           {"epochs", "2"}, {"seeds", "0..1"}, {"algos", "ista,bayeslista"}}) {
    REQUIRE(bl_config_set(cfg, key, value) == BL_OK);
  }
  bl_records* r = nullptr;
  REQUIRE(bl_run(cfg, &r) == BL_OK);
  REQUIRE(bl_records_size(r) == 8);
  bl_record rec;
  REQUIRE(bl_records_get(r, 0, &rec) == BL_OK);
  CHECK(std::string(rec.experiment) == "layers-sweep");
  CHECK(rec.round == -1);
  CHECK(std::string(rec.strategy).empty());
  CHECK(rec.nmse > 0.0);
  CHECK(bl_records_get(r, 8, &rec) == BL_INVALID_ARGUMENT);

  const std::string path = tmp_path("c_api.csv");
  REQUIRE(bl_records_write_csv(r, path.c_str(), 1) == BL_OK);
  const std::string text = slurp(path);
  CHECK(text.rfind("experiment,algorithm,L,K,seed,round,strategy,nmse,wall_ms,nmse_db\n", 0) == 0);
  CHECK(bl_records_write_csv(r, "/nonexistent-dir/x.csv", 0) == BL_DATA_ERROR);
  bl_records_destroy(r);

  REQUIRE(bl_config_set(cfg, "algos", "lista") == BL_OK);
  REQUIRE(bl_config_set(cfg, "step", "10") == BL_OK);
  REQUIRE(bl_config_set(cfg, "n-train", "50") == BL_OK);
  REQUIRE(bl_config_set(cfg, "epochs", "5") == BL_OK);
  CHECK(bl_run(cfg, &r) == BL_NUMERIC_ERROR);
  bl_config_destroy(cfg);
}
