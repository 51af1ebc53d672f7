#pragma once

// Data generation and ingestion: synthetic Gaussian tasks, CSV pools,
// tuple construction with exact positive counts, count corruption, and
// the serialization formats used by the CLI (CSV pools, JSON-lines
// tuples, audit sidecar).

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "ntmp/core.hpp"

namespace ntmp::datagen {

struct GaussianTaskSpec {
  int dim = 2;
  double prior_pi = 0.5;
  std::vector<double> mean_pos;
  std::vector<double> mean_neg;
  double cov_scale = 1.0;  // isotropic covariance multiplier
};

enum class Replacement { WithoutReplacement, WithReplacement };

// Weighted (n, m) mix for datasets whose tuples vary in size/count.
struct TupleConfigWeight {
  int n = 0;
  int m = 0;
  double weight = 0.0;
};

struct TupleBuildSpec {
  int n = 3;
  int m = 1;
  std::size_t n_tuples = 0;
  Replacement replacement = Replacement::WithoutReplacement;
  // When set, overrides (n, m); weights must sum to 1 and counts are
  // allocated deterministically by largest remainder.
  std::optional<std::vector<TupleConfigWeight>> variable_nm;
};

// Ground truth retained next to a built tuple dataset. Training code
// must never touch this; it feeds test oracles and evaluation only.
struct TupleAudit {
  std::vector<std::vector<int>> labels;              // per tuple, per slot
  std::vector<std::vector<std::size_t>> pool_indices;  // source row in the pool

  double positive_fraction() const;
};

struct BuiltTuples {
  TupleDataset dataset;
  TupleAudit audit;
};

struct Flattened {
  std::vector<InstanceSample> instances;  // tuple-major slot order
  double alpha;                            // sum(m_t) / sum(n_t)
};

class CsvParseError : public std::runtime_error {
 public:
  CsvParseError(const std::string& msg, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Data spec that cannot be satisfied: m > n, or a without-replacement
// build that needs more instances of a class than the pool holds.
class InfeasibleDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

LabeledPool gen_gaussian_pool(const GaussianTaskSpec& spec, std::size_t n_samples, RngSeed seed);

// Reads a feature CSV. An optional header row is detected by its
// non-numeric first field; with has_labels the last column (named
// "label" when a header is present) holds labels in {+1,-1} or {0,1}
// (the latter remapped to -1/+1). Unlabeled ingestion attaches the
// caller's declared prior.
std::variant<LabeledPool, UnlabeledPool> ingest_csv_pool(
    const std::filesystem::path& path, bool has_labels,
    double declared_prior = 0.5, PriorSource source = PriorSource::Estimated);

BuiltTuples build_tuples(const LabeledPool& pool, const TupleBuildSpec& spec, RngSeed seed);

Flattened flatten(const TupleDataset& dataset);

// Returns a copy whose declared counts are corrupted: with probability
// flip_prob a tuple's m moves by +-1 (direction uniform), clamped to
// [0, n]. Instance contents are untouched.
TupleDataset corrupt_counts(const TupleDataset& dataset, double flip_prob, RngSeed seed);

// The flattened tuple instances viewed as an unlabeled pool whose
// declared prior is the effective positive rate.
UnlabeledPool pool_from_flatten(const TupleDataset& dataset);

// --- serialization ---------------------------------------------------------
// Writers emit an optional provenance comment ("# ..."), then a header
// row, then data rows with round-trip float formatting, so equal inputs
// produce byte-identical files.

void write_pool_csv(std::ostream& os, const std::vector<InstanceSample>& samples,
                    bool with_labels, const std::string& provenance = "");
void write_tuples_jsonl(std::ostream& os, const TupleDataset& dataset);
void write_tuple_instances_csv(std::ostream& os, const TupleDataset& dataset,
                               const std::string& provenance = "");
void write_audit_csv(std::ostream& os, const TupleAudit& audit,
                     const std::string& provenance = "");

TupleDataset read_tuples(const std::filesystem::path& jsonl_path,
                         const std::filesystem::path& instances_csv_path);
TupleAudit read_audit_csv(const std::filesystem::path& path);

}  // namespace ntmp::datagen
