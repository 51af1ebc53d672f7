#pragma once

// Command-line front end. A single structured config file drives six
// subcommands (gen, train, estimate-prior, sweep, perturb, report);
// every command is a pure function of (config, seed) and rewrites its
// artifacts byte-identically on rerun. The command functions are
// exposed here so tests can drive them without spawning a process;
// run_cli is the argv-level wrapper that maps errors to exit codes.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ntmp/core.hpp"
#include "ntmp/datagen.hpp"
#include "ntmp/eval.hpp"
#include "ntmp/prior.hpp"
#include "ntmp/train.hpp"

namespace ntmp::cli {

// Exit codes for run_cli. The command functions themselves throw; the
// mapping to codes happens only at the process boundary.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;         // unexpected error
inline constexpr int kExitConfigError = 2;     // bad config or malformed input file
inline constexpr int kExitInfeasible = 3;      // data spec cannot be built
inline constexpr int kExitIllConditioned = 4;  // prior collides with the tuple rate

// Relative out_dir paths resolve against this environment variable
// when it is set (and against the working directory otherwise).
inline constexpr const char* kOutRootEnvVar = "NTMP_OUT_ROOT";

enum class Method {
  NtmpUre,
  NtmpAbs,
  NtmpRelu,
  Uu,
  UuCor,
  Km,
  KmPlusPlus,
  LlpBagce,
  LlpJs,
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class PriorRegime { Known, Estimated };

// Where the instances come from. Gaussian tasks are synthesized from
// the class means; csv tasks read a labeled feature file and slice it
// into audit/pool/source partitions per seed.
struct TaskSpec {
  bool gaussian = true;
  datagen::GaussianTaskSpec gauss;
  std::filesystem::path labeled_csv;
  std::filesystem::path unlabeled_csv;  // optional; sliced from labeled_csv otherwise
  double declared_prior = 0.5;          // csv tasks only; gaussian tasks carry their own
  std::size_t source_samples = 4000;    // labeled rows feeding tuple construction
  std::size_t unlabeled_samples = 1000;
  std::size_t audit_samples = 2000;     // split in half: calibration, then test
  std::size_t proxy_samples = 1000;     // positive proxy for the estimated regime
};

struct SweepSpec {
  std::vector<double> deltas;  // empty means the default grid
  std::size_t bootstrap_b = 10000;
  prior::SweepMetric metric = prior::SweepMetric::AveragePrecision;
  double epsilon = 0.02;
  double w_star = 0.05;
};

struct PerturbSpec {
  // Family "prior": the assumed prior moves to pi * (1 +- frac).
  double prior_noise_frac = 0.3;
  // Family "count": declared m flips by +-1 with these probabilities.
  std::vector<double> flip_probs = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  // Family "band": the assumed prior walks across alpha + delta, so the
  // grid deliberately crosses the ill-conditioned point at delta 0.
  std::vector<double> band_deltas = {-0.10, -0.05, -0.02, 0.0, 0.02, 0.05, 0.10};
};

struct ExperimentConfig {
  TaskSpec task;
  datagen::TupleBuildSpec tuples;
  PriorRegime prior_regime = PriorRegime::Known;
  std::vector<Method> methods;
  LossSpec loss = LossSpec::logistic();
  model::TrainConfig train;
  double llp_entropy_weight = 0.01;
  SweepSpec sweep;
  PerturbSpec perturb;
  std::size_t seeds = 1;
  RngSeed base_seed{0};
  std::filesystem::path out_dir;
  std::size_t workers = 0;  // 0 means one per hardware thread
};

// Parses the JSON config text. Unknown keys and out-of-range values
// throw std::invalid_argument with the offending key in the message.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// 16 hex digits over the canonical serialized config; stamped into the
// provenance comment of every CSV the commands write.
std::string config_hash_hex(const ExperimentConfig& cfg);
std::string canonical_config_json(const ExperimentConfig& cfg);

std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg);

struct GenOutcome {
  std::size_t n_tuples = 0;
  std::size_t pool_samples = 0;
  std::vector<std::filesystem::path> files;
};

// Writes pool.csv, tuples.jsonl, tuple_instances.csv, audit.csv.
// Everything is built in memory first, so an infeasible tuple spec
// fails before any file exists.
GenOutcome cmd_gen(const ExperimentConfig& cfg);

struct MetricRow {
  Method method = Method::NtmpUre;
  std::size_t seed_index = 0;
  eval::MetricReport report;
};

// One comparison row per method: seed-mean headline metrics plus the
// paired significance columns against the ntmp-ure row. The reference
// row and single-method runs leave the significance columns empty.
struct ComparisonRow {
  Method method = Method::NtmpUre;
  double ap = 0.0;
  double auroc = 0.0;
  double ece_ts = 0.0;
  double brier_ts = 0.0;
  std::optional<double> p_holm;
  std::optional<double> cliffs_delta;
};

struct TrainOutcome {
  std::vector<MetricRow> rows;  // method-major, seed-minor
  std::vector<ComparisonRow> comparison;
  std::string note;  // nonempty when the significance columns are empty
  std::vector<std::filesystem::path> files;
};

// Trains every configured method on every seed's data, writes
// metrics.csv, one trace CSV per (method, seed), and comparison.csv.
TrainOutcome cmd_train(const ExperimentConfig& cfg);

struct PriorOutcome {
  std::vector<prior::PriorEstimate> estimates;  // one per seed
  std::vector<std::filesystem::path> files;
};

PriorOutcome cmd_estimate_prior(const ExperimentConfig& cfg);

struct SweepOutcome {
  eval::SweepResult sweep;
  eval::RobustWindow window;
  std::vector<std::filesystem::path> files;
};

// Delta sweep around the regime prior; writes the long per-seed form,
// the aggregate form with the robustness window, and a summary with
// the window membership and critical-gap flags spelled out per row.
SweepOutcome cmd_sweep(const ExperimentConfig& cfg);

struct PerturbRow {
  std::string family;  // "prior", "count", or "band"
  double param = 0.0;
  std::size_t seed_index = 0;
  double cor = 0.0;  // accuracy under the usual confusion naming here
  double tpr = 0.0;
  double fpr = 0.0;
  double f1 = 0.0;
  bool ill_conditioned = false;
};

struct PerturbOutcome {
  std::vector<PerturbRow> rows;
  std::vector<std::filesystem::path> files;
};

// Robustness curves for the first configured method: prior
// misspecification, count noise, and the walk across the degenerate
// band. Ill-conditioned grid points are flagged rows, not failures.
PerturbOutcome cmd_perturb(const ExperimentConfig& cfg);

struct ReportOutcome {
  std::vector<ComparisonRow> comparison;
  std::string note;
  std::vector<std::filesystem::path> files;
};

// Rebuilds comparison.csv from an existing metrics.csv (written by a
// prior cmd_train run in the same out_dir) and renders the table.
ReportOutcome cmd_report(const ExperimentConfig& cfg);

// args = {subcommand, config_path}. Writes a short human summary to
// out, errors to err, and returns one of the kExit* codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ntmp::cli
