#include "bayeslista/bayeslista.h"

#include <cstdio>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "bayeslista/bench.hpp"
#include "bayeslista/data.hpp"
#include "bayeslista/distributions.hpp"
#include "bayeslista/error.hpp"
#include "bayeslista/pbp.hpp"
#include "bayeslista/rng.hpp"

struct bl_dataset {
  bayeslista::Dataset ds;
};

struct bl_model {
  bayeslista::PbpState q;
  bayeslista::MomentMode mode = bayeslista::MomentMode::kPrinted;
};

struct bl_config {
  bayeslista::ExperimentConfig cfg;
};

struct bl_records {
  std::vector<bayeslista::RunRecord> rows;
};

namespace {

thread_local std::string last_error;

bl_status fail(bl_status s, const std::string& what) {
  last_error = what;
  return s;
}

// Maps exceptions thrown by the core onto status codes.
template <class F>
bl_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return BL_OK;
  } catch (const bayeslista::Error& e) {
    return fail(static_cast<bl_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(BL_NUMERIC_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(BL_INVALID_ARGUMENT, e.what());
  }
}

#define BL_REQUIRE(cond, msg) \
  if (!(cond)) return fail(BL_INVALID_ARGUMENT, msg)

}  // namespace

extern "C" {

const char* bl_version(void) { return "1.0.0"; }

const char* bl_last_error(void) { return last_error.c_str(); }

bl_status bl_soft_threshold_gauss(double mean, double var, double lambda, double* omega,
                                  double* slab_mean, double* slab_var) {
  BL_REQUIRE(omega && slab_mean && slab_var, "null output pointer");
  return guarded([&] {
    const auto r = bayeslista::soft_threshold_gauss({mean, var}, lambda);
    *omega = r.omega;
    *slab_mean = r.mean;
    *slab_var = r.var;
  });
}

bl_status bl_dataset_generate(size_t n, size_t dim, size_t k, double spike_prob, double trunc,
                              double noise_sd, uint64_t seed, bl_dataset** out) {
  BL_REQUIRE(out, "null output pointer");
  BL_REQUIRE(n >= 1 && dim >= 1 && k >= 1, "n, dim and k must be >= 1");
  return guarded([&] {
    using bayeslista::Stream;
    auto* d = new bl_dataset;
    try {
      d->ds.X = bayeslista::gen_design(k, dim, bayeslista::derive_seed(seed, Stream::kDesign, k));
      d->ds.B = bayeslista::gen_sparse_targets(n, dim, spike_prob, trunc,
                                               bayeslista::derive_seed(seed, Stream::kTrainTargets));
      d->ds.Y = bayeslista::gen_observations(d->ds.X, d->ds.B, noise_sd,
                                             bayeslista::derive_seed(seed, Stream::kTrainNoise, k));
    } catch (...) {
      delete d;
      throw;
    }
    *out = d;
  });
}

bl_status bl_dataset_from_mnist(const char* path, size_t n, size_t k, int raw, uint64_t seed,
                                bl_dataset** out) {
  BL_REQUIRE(path && out, "null argument");
  BL_REQUIRE(n >= 1 && k >= 1, "n and k must be >= 1");
  return guarded([&] {
    using bayeslista::Stream;
    const Eigen::MatrixXd images = bayeslista::load_mnist_idx(
        path, raw ? bayeslista::PixelScale::kRaw : bayeslista::PixelScale::kUnit);
    if (images.rows() < static_cast<Eigen::Index>(n)) {
      throw bayeslista::data_error(std::string(path) + ": holds " + std::to_string(images.rows()) +
                                   " images, " + std::to_string(n) + " requested");
    }
    auto* d = new bl_dataset;
    d->ds.B = images.topRows(n);
    d->ds.X = bayeslista::gen_design(k, images.cols(), bayeslista::derive_seed(seed, Stream::kDesign, k));
    d->ds.Y = d->ds.B * d->ds.X.transpose();
    *out = d;
  });
}

bl_status bl_dataset_load(const char* path, bl_dataset** out) {
  BL_REQUIRE(path && out, "null argument");
  return guarded([&] { *out = new bl_dataset{bayeslista::load_dataset(path)}; });
}

bl_status bl_dataset_save(const bl_dataset* ds, const char* path) {
  BL_REQUIRE(ds && path, "null argument");
  return guarded([&] { bayeslista::save_dataset(path, ds->ds); });
}

bl_status bl_dataset_shape(const bl_dataset* ds, size_t* n, size_t* dim, size_t* k) {
  BL_REQUIRE(ds, "null dataset");
  if (n) *n = static_cast<size_t>(ds->ds.Y.rows());
  if (dim) *dim = static_cast<size_t>(ds->ds.X.cols());
  if (k) *k = static_cast<size_t>(ds->ds.X.rows());
  last_error.clear();
  return BL_OK;
}

bl_status bl_dataset_row(const bl_dataset* ds, size_t i, double* y, double* beta) {
  BL_REQUIRE(ds, "null dataset");
  BL_REQUIRE(i < static_cast<size_t>(ds->ds.Y.rows()), "row index out of range");
  if (y) Eigen::Map<Eigen::VectorXd>(y, ds->ds.Y.cols()) = ds->ds.Y.row(i).transpose();
  if (beta) Eigen::Map<Eigen::VectorXd>(beta, ds->ds.B.cols()) = ds->ds.B.row(i).transpose();
  last_error.clear();
  return BL_OK;
}

void bl_dataset_destroy(bl_dataset* ds) { delete ds; }

bl_status bl_model_create(size_t dim, size_t k, double lambda, int layers, uint64_t seed,
                          bl_model** out) {
  BL_REQUIRE(out, "null output pointer");
  BL_REQUIRE(dim >= 1 && k >= 1, "dim and k must be >= 1");
  BL_REQUIRE(layers >= 0, "layers must be >= 0");
  BL_REQUIRE(lambda >= 0.0, "lambda must be >= 0");
  return guarded([&] {
    *out = new bl_model{bayeslista::pbp_init(dim, k, lambda, layers, seed)};
  });
}

bl_status bl_model_create_warm(const bl_dataset* ds, double lambda, int layers,
                               double var_scale, bl_model** out) {
  BL_REQUIRE(ds && out, "null argument");
  BL_REQUIRE(layers >= 0, "layers must be >= 0");
  BL_REQUIRE(lambda >= 0.0, "lambda must be >= 0");
  BL_REQUIRE(var_scale > 0.0, "var_scale must be > 0");
  return guarded([&] {
    const auto w = bayeslista::ista_weights(ds->ds.X, lambda);
    *out = new bl_model{bayeslista::pbp_init_from_ista(w, lambda, layers, var_scale)};
  });
}

bl_status bl_model_set_exact_moments(bl_model* m, int exact) {
  BL_REQUIRE(m, "null model");
  m->mode = exact ? bayeslista::MomentMode::kExact : bayeslista::MomentMode::kPrinted;
  last_error.clear();
  return BL_OK;
}

bl_status bl_model_train(bl_model* m, const bl_dataset* ds, int epochs, uint64_t seed) {
  BL_REQUIRE(m && ds, "null argument");
  BL_REQUIRE(epochs >= 1, "epochs must be >= 1");
  BL_REQUIRE(ds->ds.X.rows() == m->q.obs_dim() && ds->ds.X.cols() == m->q.dim(),
             "dataset shape does not match the model");
  return guarded([&] {
    bayeslista::PbpTrainOptions o;
    o.epochs = epochs;
    o.seed = seed;
    o.pbp.mode = m->mode;
    m->q = bayeslista::pbp_train(ds->ds.Y, ds->ds.B, m->q, o);
  });
}

bl_status bl_model_predict(const bl_model* m, const double* y, double* mean, double* var) {
  BL_REQUIRE(m && y, "null argument");
  return guarded([&] {
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y, m->q.obs_dim());
    const auto p = bayeslista::pbp_predict(m->q, yv, m->mode);
    if (mean) Eigen::Map<Eigen::VectorXd>(mean, p.mean.size()) = p.mean;
    if (var) Eigen::Map<Eigen::VectorXd>(var, p.var.size()) = p.var;
  });
}

void bl_model_destroy(bl_model* m) { delete m; }

bl_status bl_config_create(const char* experiment, bl_config** out) {
  BL_REQUIRE(experiment && out, "null argument");
  return guarded([&] {
    *out = new bl_config{bayeslista::default_config(bayeslista::parse_experiment(experiment))};
  });
}

bl_status bl_config_set(bl_config* cfg, const char* key, const char* value) {
  BL_REQUIRE(cfg && key && value, "null argument");
  return guarded([&] { bayeslista::set_option(cfg->cfg, key, value); });
}

void bl_config_destroy(bl_config* cfg) { delete cfg; }

bl_status bl_run(const bl_config* cfg, bl_records** out) {
  BL_REQUIRE(cfg && out, "null argument");
  return guarded([&] { *out = new bl_records{bayeslista::run_experiment(cfg->cfg)}; });
}

size_t bl_records_size(const bl_records* r) { return r ? r->rows.size() : 0; }

bl_status bl_records_get(const bl_records* r, size_t i, bl_record* out) {
  BL_REQUIRE(r && out, "null argument");
  BL_REQUIRE(i < r->rows.size(), "record index out of range");
  const auto& row = r->rows[i];
  // to_string returns views of string literals, so these pointers are static.
  out->experiment = bayeslista::to_string(row.experiment).data();
  out->algorithm = bayeslista::to_string(row.algorithm).data();
  out->layers = row.layers;
  out->k = row.k;
  out->seed = row.seed;
  out->round = row.round.value_or(-1);
  out->strategy = row.strategy ? bayeslista::to_string(*row.strategy).data() : "";
  out->nmse = row.nmse;
  out->wall_ms = row.wall_ms;
  last_error.clear();
  return BL_OK;
}

bl_status bl_records_write_csv(const bl_records* r, const char* path, int nmse_db) {
  BL_REQUIRE(r && path, "null argument");
  return guarded([&] {
    if (std::string(path) == "-") {
      const std::string text = bayeslista::format_csv(r->rows, nmse_db != 0);
      if (std::fwrite(text.data(), 1, text.size(), stdout) != text.size() || std::fflush(stdout) != 0) {
        throw bayeslista::data_error("write to standard output failed");
      }
    } else {
      bayeslista::emit_csv(r->rows, path, nmse_db != 0);
    }
  });
}

void bl_records_destroy(bl_records* r) { delete r; }

}  // extern "C"
