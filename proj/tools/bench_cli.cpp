// Command-line front end for the experiment runner. Talks to the library
// only through the C interface.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bayeslista/bayeslista.h"

namespace {

constexpr int kExitConfig = 2;

// Options accepted by every subcommand, forwarded verbatim to bl_config_set.
const std::vector<std::pair<std::string, std::string>> kValueOptions = {
    {"layers", "Layer counts, e.g. 1,2,4 or 1..4"},
    {"k", "Observation size(s) K"},
    {"ks", "Observation sizes K (alias of --k)"},
    {"d", "Target dimension D (synthetic data)"},
    {"lambda", "Shrinkage parameter"},
    {"noise-sd", "Observation noise standard deviation"},
    {"spike-prob", "Probability of an exact zero in synthetic targets"},
    {"trunc", "Minimum magnitude of nonzero synthetic targets"},
    {"n-train", "Training pairs"},
    {"train", "Training pairs (alias of --n-train)"},
    {"n-test", "Test pairs"},
    {"test", "Test pairs (alias of --n-test)"},
    {"pool", "Pool size (active learning)"},
    {"epochs", "Training epochs for both networks"},
    {"lista-epochs", "SGD epochs for LISTA only"},
    {"pbp-epochs", "ADF/EP sweeps for BayesLISTA only"},
    {"step", "LISTA SGD step size"},
    {"algos", "Comma-separated subset of ista,fista,lista,bayeslista"},
    {"seeds", "Seed list, e.g. 0..4"},
    {"repeats", "Use seeds 0..N-1"},
    {"rounds", "Acquisition rounds (active learning)"},
    {"strategy", "active, random or both"},
    {"source", "Target source for active learning: mnist or synthetic"},
    {"images", "MNIST IDX image file"},
    {"priors", "Refine weight priors with EP (1 or 0)"},
    {"init", "Network initialisation: ista (warm start) or random"},
    {"init-var-scale", "BayesLISTA initial weight variance scale"},
    {"variance-guard", "clamp, reject-entry or reject-point"},
    {"seed-offset", "Added to every seed"},
    {"threads", "Worker threads across seeds"},
    {"format", "Output format (csv)"},
    {"mnist-scale", "Pixel scale: unit (divide by 255) or raw"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse coding benchmarks: ISTA, FISTA, LISTA and BayesLISTA"};
  app.require_subcommand(1);

  std::string out = "-";
  bool exact = false;
  bool nmse_db = false;
  std::map<std::string, std::string> values;

  app.add_option("--out,-o", out, "CSV output path (- for stdout)");
  app.add_flag("--exact-moments", exact, "Use exact product variances in BayesLISTA");
  app.add_flag("--nmse-db", nmse_db, "Add an nmse_db column");

  const std::vector<std::pair<std::string, std::string>> subcommands = {
      {"layers-sweep", "NMSE against the number of layers"},
      {"k-sweep", "NMSE against the observation size"},
      {"mnist", "NMSE curves over training epochs on MNIST"},
      {"active", "Uncertainty sampling against random acquisition"},
  };
  for (const auto& [name, help] : subcommands) app.add_subcommand(name, help)->fallthrough();
  // Options live on the main app so they may appear on either side of the
  // subcommand name.
  for (const auto& [key, help] : kValueOptions) app.add_option("--" + key, values[key], help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const std::string experiment = app.get_subcommands().front()->get_name();
  bl_config* cfg = nullptr;
  bl_records* records = nullptr;
  auto die = [&](bl_status s) {
    std::fprintf(stderr, "bench: %s\n", bl_last_error());
    bl_config_destroy(cfg);
    bl_records_destroy(records);
    return static_cast<int>(s);
  };

  if (bl_status s = bl_config_create(experiment.c_str(), &cfg); s != BL_OK) return die(s);
  for (const auto& [key, help] : kValueOptions) {
    if (app.count("--" + key) == 0) continue;
    if (bl_status s = bl_config_set(cfg, key.c_str(), values[key].c_str()); s != BL_OK) return die(s);
  }
  if (exact) {
    if (bl_status s = bl_config_set(cfg, "exact-moments", "1"); s != BL_OK) return die(s);
  }
  if (bl_status s = bl_run(cfg, &records); s != BL_OK) return die(s);
  if (bl_status s = bl_records_write_csv(records, out.c_str(), nmse_db); s != BL_OK) return die(s);
  bl_records_destroy(records);
  bl_config_destroy(cfg);
  return 0;
}
