#include "bayeslista/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <tuple>

#include "bayeslista/classic_solvers.hpp"
#include "bayeslista/error.hpp"
#include "bayeslista/lista.hpp"
#include "bayeslista/pbp.hpp"
#include "bayeslista/rng.hpp"

namespace bayeslista {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    parts.push_back(s.substr(start, at == std::string_view::npos ? s.npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return parts;
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw config_error("--" + std::string(key) + ": cannot parse '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  throw config_error("--" + std::string(key) + ": expected a boolean, got '" + std::string(text) +
                     "'");
}

// "1,2,4" or "0..4" (inclusive) or a mix, e.g. "0..2,7".
template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  for (std::string_view item : split(text, ',')) {
    const std::size_t dots = item.find("..");
    if (dots == std::string_view::npos) {
      out.push_back(parse_number<T>(key, item));
      continue;
    }
    const T lo = parse_number<T>(key, item.substr(0, dots));
    const T hi = parse_number<T>(key, item.substr(dots + 2));
    if (hi < lo) throw config_error("--" + std::string(key) + ": empty range '" + std::string(item) + "'");
    for (T v = lo; v <= hi; ++v) out.push_back(v);
  }
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
  std::vector<std::uint64_t> seeds(n);
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
  return seeds;
}

/// Runs cells [0, n) on up to `threads` workers. Cells write disjoint
/// outputs, so scheduling never changes results. The first failure (by cell
/// index) is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Split {
  Eigen::MatrixXd Y, B;
};

struct SweepData {
  Eigen::MatrixXd X;
  Split train, test;
};

SweepData synthetic_data(const ExperimentConfig& cfg, std::uint64_t seed, int k) {
  SweepData d;
  d.X = gen_design(k, cfg.dim, derive_seed(seed, Stream::kDesign, k));
  d.train.B = gen_sparse_targets(cfg.n_train, cfg.dim, cfg.spike_prob, cfg.trunc,
                                 derive_seed(seed, Stream::kTrainTargets));
  d.test.B = gen_sparse_targets(cfg.n_test, cfg.dim, cfg.spike_prob, cfg.trunc,
                                derive_seed(seed, Stream::kTestTargets));
  d.train.Y = gen_observations(d.X, d.train.B, cfg.noise_sd, derive_seed(seed, Stream::kTrainNoise, k));
  d.test.Y = gen_observations(d.X, d.test.B, cfg.noise_sd, derive_seed(seed, Stream::kTestNoise, k));
  return d;
}

// Disjoint random rows of the image matrix, in draw order.
std::vector<Eigen::Index> draw_rows(Eigen::Index available, Eigen::Index needed, std::uint64_t seed) {
  if (needed > available) {
    throw config_error("need " + std::to_string(needed) + " images but the file holds only " +
                       std::to_string(available));
  }
  std::vector<Eigen::Index> idx(available);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  // Partial Fisher-Yates; only the first `needed` positions are used.
  for (Eigen::Index i = 0; i < needed; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(available - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(needed);
  return idx;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                          std::size_t from, std::size_t count) {
  Eigen::MatrixXd out(count, m.cols());
  for (std::size_t i = 0; i < count; ++i) out.row(i) = m.row(rows[from + i]);
  return out;
}

Eigen::MatrixXd predict_all(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::MatrixXd& Y, Eigen::Index dim) {
  Eigen::MatrixXd out(Y.rows(), dim);
  for (Eigen::Index n = 0; n < Y.rows(); ++n) out.row(n) = f(Y.row(n).transpose()).transpose();
  return out;
}

PbpState initial_belief(const ExperimentConfig& cfg, const Eigen::MatrixXd& X, int layers,
                        std::uint64_t seed) {
  if (cfg.warm_start) {
    return pbp_init_from_ista(ista_weights(X, cfg.lambda), cfg.lambda, layers, cfg.init_var_scale);
  }
  return pbp_init(X.cols(), X.rows(), cfg.lambda, layers, derive_seed(seed, Stream::kModelInit));
}

PbpTrainOptions pbp_options(const ExperimentConfig& cfg, std::uint64_t seed) {
  PbpTrainOptions o;
  o.epochs = cfg.pbp_epochs;
  o.seed = derive_seed(seed, Stream::kShuffle);
  o.pbp.mode = cfg.mode;
  o.pbp.priors = cfg.priors;
  o.pbp.guard = cfg.guard;
  return o;
}

Eigen::MatrixXd pbp_predict_all(const PbpState& q, const Eigen::MatrixXd& Y, MomentMode mode) {
  return predict_all([&](const Eigen::VectorXd& y) { return pbp_predict(q, y, mode).mean; }, Y,
                     q.dim());
}

/// One algorithm on one train/test split. With `curve`, one record per
/// epoch (round = epoch) is produced; otherwise a single record.
std::vector<RunRecord> run_algorithm(const ExperimentConfig& cfg, Algorithm algo,
                                     const Eigen::MatrixXd& X, const Split& train,
                                     const Split& test, int layers, std::uint64_t seed,
                                     bool curve) {
  RunRecord base;
  base.experiment = cfg.experiment;
  base.algorithm = algo;
  base.layers = layers;
  base.k = static_cast<int>(X.rows());
  base.seed = seed;

  std::vector<RunRecord> out;
  const auto start = Clock::now();
  auto emit = [&](std::optional<int> round, double value) {
    RunRecord r = base;
    r.round = round;
    r.nmse = value;
    r.wall_ms = elapsed_ms(start);
    out.push_back(r);
  };

  const IstaWeights iw = ista_weights(X, cfg.lambda);
  const Eigen::Index dim = X.cols();
  switch (algo) {
    case Algorithm::kIsta:
    case Algorithm::kFista: {
      using Solver = Eigen::VectorXd (*)(const IstaWeights&, const Eigen::VectorXd&, int);
      const Solver solve = algo == Algorithm::kIsta ? static_cast<Solver>(ista_solve)
                                                    : static_cast<Solver>(fista_solve);
      const double v = nmse(
          predict_all([&](const Eigen::VectorXd& y) { return solve(iw, y, layers); }, test.Y, dim),
          test.B);
      // Nothing is trained, so the curve is flat.
      if (curve) {
        for (int e = 1; e <= cfg.epochs; ++e) emit(e, v);
      } else {
        emit(std::nullopt, v);
      }
      break;
    }
    case Algorithm::kLista: {
      ListaTrainOptions o;
      o.epochs = cfg.epochs;
      o.step = cfg.step;
      o.seed = derive_seed(seed, Stream::kShuffle);
      if (curve) {
        o.on_epoch = [&](int epoch, double, const ListaModel& m) {
          emit(epoch, nmse(predict_all([&](const Eigen::VectorXd& y) { return lista_forward(m, y); },
                                       test.Y, dim),
                           test.B));
        };
      }
      const ListaModel init =
          cfg.warm_start ? lista_from_ista(iw, layers)
                         : lista_random_init(dim, X.rows(), cfg.lambda, layers,
                                             derive_seed(seed, Stream::kModelInit));
      const ListaModel m = lista_train(train.Y, train.B, init, o);
      if (!curve) {
        emit(std::nullopt,
             nmse(predict_all([&](const Eigen::VectorXd& y) { return lista_forward(m, y); }, test.Y,
                              dim),
                  test.B));
      }
      break;
    }
    case Algorithm::kBayesLista: {
      PbpTrainOptions o = pbp_options(cfg, seed);
      if (curve) {
        o.on_epoch = [&](int epoch, const PbpState& q, const PbpCounters&) {
          emit(epoch, nmse(pbp_predict_all(q, test.Y, cfg.mode), test.B));
        };
      }
      const PbpState q0 = initial_belief(cfg, X, layers, seed);
      const PbpState q = pbp_train(train.Y, train.B, q0, o);
      if (!curve) emit(std::nullopt, nmse(pbp_predict_all(q, test.Y, cfg.mode), test.B));
      break;
    }
  }
  return out;
}

// Collects per-cell record lists in cell order, then sorts.
std::vector<RunRecord> gather(std::vector<std::vector<RunRecord>>& cells) {
  std::vector<RunRecord> all;
  for (auto& c : cells) all.insert(all.end(), c.begin(), c.end());
  sort_records(all);
  return all;
}

std::vector<RunRecord> run_synthetic_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  struct Cell {
    std::uint64_t seed;
    int layers, k;
  };
  std::vector<Cell> cells;
  for (std::uint64_t s : cfg.seeds) {
    for (int k : cfg.ks) {
      for (int l : cfg.layers) cells.push_back({s + cfg.seed_offset, l, k});
    }
  }
  std::vector<std::vector<RunRecord>> results(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    const SweepData d = synthetic_data(cfg, c.seed, c.k);
    for (Algorithm a : cfg.algorithms) {
      auto r = run_algorithm(cfg, a, d.X, d.train, d.test, c.layers, c.seed, false);
      results[i].insert(results[i].end(), r.begin(), r.end());
    }
  });
  return gather(results);
}

Eigen::MatrixXd load_images(const ExperimentConfig& cfg) {
  if (cfg.images.empty()) throw config_error("an MNIST image file is required (--images)");
  return load_mnist_idx(cfg.images, cfg.mnist_scale);
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kIsta: return "ista";
    case Algorithm::kFista: return "fista";
    case Algorithm::kLista: return "lista";
    case Algorithm::kBayesLista: return "bayeslista";
  }
  return "?";
}

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::kLayersSweep: return "layers-sweep";
    case Experiment::kKSweep: return "k-sweep";
    case Experiment::kMnist: return "mnist";
    case Experiment::kActive: return "active";
  }
  return "?";
}

std::string_view to_string(Strategy s) {
  return s == Strategy::kActive ? "active" : "random";
}

Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : {Algorithm::kIsta, Algorithm::kFista, Algorithm::kLista, Algorithm::kBayesLista}) {
    if (to_string(a) == s) return a;
  }
  throw config_error("unknown algorithm '" + std::string(s) + "'");
}

Experiment parse_experiment(std::string_view s) {
  for (Experiment e : {Experiment::kLayersSweep, Experiment::kKSweep, Experiment::kMnist,
                       Experiment::kActive}) {
    if (to_string(e) == s) return e;
  }
  throw config_error("unknown experiment '" + std::string(s) + "'");
}

Strategy parse_strategy(std::string_view s) {
  if (s == "active") return Strategy::kActive;
  if (s == "random") return Strategy::kRandom;
  throw config_error("unknown strategy '" + std::string(s) + "'");
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::kLayersSweep:
      break;
    case Experiment::kKSweep:
      c.layers = {4};
      c.ks = {25, 50, 75, 100};
      break;
    case Experiment::kMnist:
      c.layers = {4};
      c.ks = {100};
      c.n_train = 100;
      c.n_test = 100;
      c.noise_sd = 0.0;
      c.source = DataSource::kMnist;
      c.init_var_scale = 1e-4;
      break;
    case Experiment::kActive:
      c.layers = {4};
      c.ks = {100};
      c.n_train = 50;
      c.n_pool = 500;
      c.n_test = 100;
      c.noise_sd = 0.0;
      c.algorithms = {Algorithm::kBayesLista};
      c.seeds = seed_range(20);
      c.source = DataSource::kMnist;
      c.init_var_scale = 1e-4;
      // Every round retrains from scratch; the MNIST curves flatten by epoch 10.
      c.epochs = 10;
      c.pbp_epochs = 10;
      break;
  }
  return c;
}

void set_option(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "layers") {
    cfg.layers = parse_list<int>(key, value);
  } else if (key == "k" || key == "ks") {
    cfg.ks = parse_list<int>(key, value);
  } else if (key == "d") {
    cfg.dim = parse_number<int>(key, value);
  } else if (key == "lambda") {
    cfg.lambda = parse_number<double>(key, value);
  } else if (key == "noise-sd") {
    cfg.noise_sd = parse_number<double>(key, value);
  } else if (key == "spike-prob") {
    cfg.spike_prob = parse_number<double>(key, value);
  } else if (key == "trunc") {
    cfg.trunc = parse_number<double>(key, value);
  } else if (key == "n-train" || key == "train") {
    cfg.n_train = parse_number<int>(key, value);
  } else if (key == "n-test" || key == "test") {
    cfg.n_test = parse_number<int>(key, value);
  } else if (key == "pool") {
    cfg.n_pool = parse_number<int>(key, value);
  } else if (key == "epochs") {
    cfg.epochs = parse_number<int>(key, value);
    cfg.pbp_epochs = cfg.epochs;
  } else if (key == "lista-epochs") {
    cfg.epochs = parse_number<int>(key, value);
  } else if (key == "pbp-epochs") {
    cfg.pbp_epochs = parse_number<int>(key, value);
  } else if (key == "step") {
    cfg.step = parse_number<double>(key, value);
  } else if (key == "algos") {
    cfg.algorithms.clear();
    for (auto a : split(value, ',')) cfg.algorithms.push_back(parse_algorithm(a));
  } else if (key == "seeds") {
    cfg.seeds = parse_list<std::uint64_t>(key, value);
  } else if (key == "repeats") {
    cfg.seeds = seed_range(parse_number<std::uint64_t>(key, value));
  } else if (key == "seed-offset") {
    cfg.seed_offset = parse_number<std::uint64_t>(key, value);
  } else if (key == "rounds") {
    cfg.rounds = parse_number<int>(key, value);
  } else if (key == "strategy") {
    cfg.strategies.clear();
    for (auto s : split(value, ',')) cfg.strategies.push_back(parse_strategy(s));
  } else if (key == "source") {
    if (value == "mnist") {
      cfg.source = DataSource::kMnist;
    } else if (value == "synthetic") {
      cfg.source = DataSource::kSynthetic;
    } else {
      throw config_error("--source: expected mnist or synthetic, got '" + std::string(value) + "'");
    }
  } else if (key == "images") {
    cfg.images = std::string(value);
  } else if (key == "mnist-scale") {
    if (value == "unit") {
      cfg.mnist_scale = PixelScale::kUnit;
    } else if (value == "raw") {
      cfg.mnist_scale = PixelScale::kRaw;
    } else {
      throw config_error("--mnist-scale: expected unit or raw, got '" + std::string(value) + "'");
    }
  } else if (key == "exact-moments") {
    cfg.mode = parse_bool(key, value) ? MomentMode::kExact : MomentMode::kPrinted;
  } else if (key == "priors") {
    cfg.priors = parse_bool(key, value);
  } else if (key == "init") {
    if (value == "ista") {
      cfg.warm_start = true;
    } else if (value == "random") {
      cfg.warm_start = false;
    } else {
      throw config_error("--init: expected ista or random, got '" + std::string(value) + "'");
    }
  } else if (key == "init-var-scale") {
    cfg.init_var_scale = parse_number<double>(key, value);
  } else if (key == "variance-guard") {
    if (value == "clamp") {
      cfg.guard = VarianceGuard::kClamp;
    } else if (value == "reject-entry") {
      cfg.guard = VarianceGuard::kRejectEntry;
    } else if (value == "reject-point") {
      cfg.guard = VarianceGuard::kRejectPoint;
    } else {
      throw config_error("--variance-guard: expected clamp, reject-entry or reject-point");
    }
  } else if (key == "threads") {
    cfg.threads = parse_number<int>(key, value);
  } else if (key == "nmse-db") {
    cfg.nmse_db = parse_bool(key, value);
  } else if (key == "format") {
    if (value != "csv") throw config_error("--format: only csv is supported");
  } else {
    throw config_error("unknown option '" + std::string(key) + "'");
  }
}

void validate(const ExperimentConfig& cfg) {
  auto positive = [](const char* name, long long v) {
    if (v < 1) throw config_error(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  if (cfg.layers.empty()) throw config_error("layers list is empty");
  if (cfg.ks.empty()) throw config_error("K list is empty");
  for (int l : cfg.layers) {
    if (l < 0) throw config_error("layers must be >= 0, got " + std::to_string(l));
  }
  for (int k : cfg.ks) positive("K", k);
  positive("D", cfg.dim);
  positive("n_train", cfg.n_train);
  positive("n_test", cfg.n_test);
  positive("epochs", cfg.epochs);
  positive("pbp epochs", cfg.pbp_epochs);
  positive("threads", cfg.threads);
  if (cfg.algorithms.empty()) throw config_error("algorithm list is empty");
  if (cfg.seeds.empty()) throw config_error("seed list is empty");
  if (!(cfg.lambda >= 0.0)) throw config_error("lambda must be >= 0");
  if (!(cfg.noise_sd >= 0.0)) throw config_error("noise_sd must be >= 0");
  if (!(cfg.step > 0.0)) throw config_error("step must be > 0");
  if (!(cfg.init_var_scale > 0.0)) throw config_error("init-var-scale must be > 0");
  if (!(cfg.spike_prob >= 0.0 && cfg.spike_prob <= 1.0)) {
    throw config_error("spike_prob must lie in [0, 1]");
  }
  if (cfg.experiment == Experiment::kActive) {
    positive("pool size", cfg.n_pool);
    positive("rounds", cfg.rounds);
    if (cfg.rounds > cfg.n_pool) {
      throw config_error("rounds (" + std::to_string(cfg.rounds) + ") exceed the pool size (" +
                         std::to_string(cfg.n_pool) + ")");
    }
    if (cfg.strategies.empty()) throw config_error("strategy list is empty");
  }
}

double nmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw invalid_argument("nmse: shape mismatch");
  }
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw invalid_argument("nmse: truth is all zero");
  return (pred - truth).squaredNorm() / denom;
}

std::vector<RunRecord> run_layers_sweep(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.experiment = Experiment::kLayersSweep;
  return run_synthetic_sweep(c);
}

std::vector<RunRecord> run_k_sweep(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.experiment = Experiment::kKSweep;
  return run_synthetic_sweep(c);
}

std::vector<RunRecord> run_mnist(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.experiment = Experiment::kMnist;
  validate(c);
  const Eigen::MatrixXd images = load_images(c);

  struct Cell {
    std::uint64_t seed;
    int layers, k;
  };
  std::vector<Cell> cells;
  for (std::uint64_t s : c.seeds) {
    for (int k : c.ks) {
      for (int l : c.layers) cells.push_back({s + c.seed_offset, l, k});
    }
  }
  std::vector<std::vector<RunRecord>> results(cells.size());
  parallel_for(cells.size(), c.threads, [&](std::size_t i) {
    const Cell& cell = cells[i];
    const auto rows = draw_rows(images.rows(), c.n_train + c.n_test, derive_seed(cell.seed, Stream::kSplit));
    const Eigen::MatrixXd X = gen_design(cell.k, images.cols(), derive_seed(cell.seed, Stream::kDesign, cell.k));
    Split train{{}, take_rows(images, rows, 0, c.n_train)};
    Split test{{}, take_rows(images, rows, c.n_train, c.n_test)};
    train.Y = gen_observations(X, train.B, c.noise_sd, derive_seed(cell.seed, Stream::kTrainNoise, cell.k));
    test.Y = gen_observations(X, test.B, c.noise_sd, derive_seed(cell.seed, Stream::kTestNoise, cell.k));
    for (Algorithm a : c.algorithms) {
      auto r = run_algorithm(c, a, X, train, test, cell.layers, cell.seed, true);
      results[i].insert(results[i].end(), r.begin(), r.end());
    }
  });
  return gather(results);
}

Eigen::Index select_most_uncertain(const PbpState& q, const Eigen::MatrixXd& pool_Y,
                                   MomentMode mode) {
  if (pool_Y.rows() == 0) throw invalid_argument("select_most_uncertain: empty pool");
  Eigen::Index best = 0;
  double best_score = -1.0;
  for (Eigen::Index n = 0; n < pool_Y.rows(); ++n) {
    const double score = pbp_predict(q, pool_Y.row(n).transpose(), mode).var.sum();
    if (score > best_score) {
      best = n;
      best_score = score;
    }
  }
  return best;
}

std::vector<RunRecord> run_active_learning(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.experiment = Experiment::kActive;
  validate(c);
  const int k = c.ks.front();
  const int layers = c.layers.front();
  Eigen::MatrixXd images;
  if (c.source == DataSource::kMnist) images = load_images(c);
  const Eigen::Index dim = c.source == DataSource::kMnist ? images.cols() : c.dim;

  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s : c.seeds) seeds.push_back(s + c.seed_offset);
  std::vector<std::vector<RunRecord>> results(seeds.size());

  parallel_for(seeds.size(), c.threads, [&](std::size_t i) {
    const std::uint64_t seed = seeds[i];
    const Eigen::MatrixXd X = gen_design(k, dim, derive_seed(seed, Stream::kDesign, k));
    Eigen::MatrixXd train_B, pool_B, test_B;
    if (c.source == DataSource::kMnist) {
      const auto rows = draw_rows(images.rows(), c.n_train + c.n_pool + c.n_test,
                                  derive_seed(seed, Stream::kSplit));
      train_B = take_rows(images, rows, 0, c.n_train);
      pool_B = take_rows(images, rows, c.n_train, c.n_pool);
      test_B = take_rows(images, rows, c.n_train + c.n_pool, c.n_test);
    } else {
      train_B = gen_sparse_targets(c.n_train, dim, c.spike_prob, c.trunc, derive_seed(seed, Stream::kTrainTargets));
      pool_B = gen_sparse_targets(c.n_pool, dim, c.spike_prob, c.trunc, derive_seed(seed, Stream::kPoolTargets));
      test_B = gen_sparse_targets(c.n_test, dim, c.spike_prob, c.trunc, derive_seed(seed, Stream::kTestTargets));
    }
    const Eigen::MatrixXd train_Y = gen_observations(X, train_B, c.noise_sd, derive_seed(seed, Stream::kTrainNoise, k));
    const Eigen::MatrixXd pool_Y = gen_observations(X, pool_B, c.noise_sd, derive_seed(seed, Stream::kPoolNoise, k));
    const Eigen::MatrixXd test_Y = gen_observations(X, test_B, c.noise_sd, derive_seed(seed, Stream::kTestNoise, k));

    const PbpState q0 = initial_belief(c, X, layers, seed);
    const PbpTrainOptions opts = pbp_options(c, seed);
    const auto start = Clock::now();
    const PbpState initial = pbp_train(train_Y, train_B, q0, opts);
    const double initial_ms = elapsed_ms(start);

    for (Strategy strategy : c.strategies) {
      const auto strategy_start = Clock::now();
      Rng pick(derive_seed(seed, Stream::kAcquisition));
      std::vector<Eigen::Index> pool(static_cast<std::size_t>(pool_Y.rows()));
      std::iota(pool.begin(), pool.end(), Eigen::Index{0});
      std::vector<Eigen::Index> added;
      PbpState q = initial;
      for (int round = 1; round <= c.rounds; ++round) {
        Eigen::Index at;
        if (strategy == Strategy::kActive) {
          Eigen::MatrixXd remaining(pool.size(), pool_Y.cols());
          for (std::size_t j = 0; j < pool.size(); ++j) remaining.row(j) = pool_Y.row(pool[j]);
          at = select_most_uncertain(q, remaining, c.mode);
        } else {
          at = static_cast<Eigen::Index>(pick.below(pool.size()));
        }
        added.push_back(pool[at]);
        pool.erase(pool.begin() + at);

        // Retrain from the initial belief on the enlarged training set.
        Eigen::MatrixXd Y(train_Y.rows() + added.size(), k);
        Eigen::MatrixXd B(train_B.rows() + added.size(), dim);
        Y.topRows(train_Y.rows()) = train_Y;
        B.topRows(train_B.rows()) = train_B;
        for (std::size_t j = 0; j < added.size(); ++j) {
          Y.row(train_Y.rows() + j) = pool_Y.row(added[j]);
          B.row(train_B.rows() + j) = pool_B.row(added[j]);
        }
        q = pbp_train(Y, B, q0, opts);

        RunRecord r;
        r.experiment = Experiment::kActive;
        r.algorithm = Algorithm::kBayesLista;
        r.layers = layers;
        r.k = k;
        r.seed = seed;
        r.round = round;
        r.strategy = strategy;
        r.nmse = nmse(pbp_predict_all(q, test_Y, c.mode), test_B);
        r.wall_ms = initial_ms + elapsed_ms(strategy_start);
        results[i].push_back(r);
      }
    }
  });
  return gather(results);
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::kLayersSweep: return run_layers_sweep(cfg);
    case Experiment::kKSweep: return run_k_sweep(cfg);
    case Experiment::kMnist: return run_mnist(cfg);
    case Experiment::kActive: return run_active_learning(cfg);
  }
  throw config_error("unknown experiment");
}

void sort_records(std::vector<RunRecord>& records) {
  auto key = [](const RunRecord& r) {
    return std::make_tuple(static_cast<int>(r.experiment), static_cast<int>(r.algorithm), r.k,
                           r.layers, r.seed, r.strategy ? static_cast<int>(*r.strategy) : -1,
                           r.round.value_or(-1));
  };
  std::stable_sort(records.begin(), records.end(),
                   [&](const RunRecord& a, const RunRecord& b) { return key(a) < key(b); });
}

std::string csv_header(bool nmse_db) {
  std::string h = "experiment,algorithm,L,K,seed,round,strategy,nmse,wall_ms";
  if (nmse_db) h += ",nmse_db";
  return h + "\n";
}

std::string format_csv(const std::vector<RunRecord>& records, bool nmse_db) {
  std::string out = csv_header(nmse_db);
  char buf[64];
  auto real = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const RunRecord& r : records) {
    out += to_string(r.experiment);
    out += ',';
    out += to_string(r.algorithm);
    out += ',' + std::to_string(r.layers) + ',' + std::to_string(r.k) + ',' + std::to_string(r.seed) + ',';
    if (r.round) out += std::to_string(*r.round);
    out += ',';
    if (r.strategy) out += to_string(*r.strategy);
    out += ',' + real(r.nmse) + ',' + real(r.wall_ms);
    if (nmse_db) out += ',' + real(10.0 * std::log10(r.nmse));
    out += '\n';
  }
  return out;
}

void emit_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path,
              bool nmse_db) {
  const std::string text = format_csv(records, nmse_db);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.flush();
  if (!f) throw data_error("write failed: " + path.string());
}

std::vector<RunRecord> parse_csv(std::string_view text) {
  std::vector<RunRecord> out;
  auto lines = split(text, '\n');
  if (lines.empty() || lines.front().substr(0, 53) != csv_header(false).substr(0, 53)) {
    throw data_error("csv: unexpected header");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() < 9) throw data_error("csv: line " + std::to_string(i + 1) + " has too few fields");
    RunRecord r;
    r.experiment = parse_experiment(f[0]);
    r.algorithm = parse_algorithm(f[1]);
    r.layers = parse_number<int>("L", f[2]);
    r.k = parse_number<int>("K", f[3]);
    r.seed = parse_number<std::uint64_t>("seed", f[4]);
    if (!f[5].empty()) r.round = parse_number<int>("round", f[5]);
    if (!f[6].empty()) r.strategy = parse_strategy(f[6]);
    r.nmse = parse_number<double>("nmse", f[7]);
    r.wall_ms = parse_number<double>("wall_ms", f[8]);
    out.push_back(r);
  }
  return out;
}

}  // namespace bayeslista
