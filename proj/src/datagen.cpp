#include "ntmp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace ntmp::datagen {

using nlohmann::json;

CsvParseError::CsvParseError(const std::string& msg, std::size_t line)
    : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}

double TupleAudit::positive_fraction() const {
  std::size_t pos = 0, total = 0;
  for (const auto& tuple : labels) {
    for (int y : tuple) {
      if (y == 1) ++pos;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("positive fraction of an empty audit");
  return static_cast<double>(pos) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Gaussian task.

static void validate_gaussian_spec(const GaussianTaskSpec& spec) {
  if (spec.dim < 1) throw std::invalid_argument("gaussian task: dim must be >= 1");
  if (!(spec.prior_pi > 0.0 && spec.prior_pi < 1.0)) {
    throw std::invalid_argument("gaussian task: prior must lie in (0,1)");
  }
  if (!(spec.cov_scale > 0.0)) throw std::invalid_argument("gaussian task: cov_scale must be positive");
  if (spec.mean_pos.size() != static_cast<std::size_t>(spec.dim) ||
      spec.mean_neg.size() != static_cast<std::size_t>(spec.dim)) {
    throw std::invalid_argument("gaussian task: class means must have length dim");
  }
  if (spec.mean_pos == spec.mean_neg) {
    throw std::invalid_argument("gaussian task: class means coincide, classes are indistinguishable");
  }
}

LabeledPool gen_gaussian_pool(const GaussianTaskSpec& spec, std::size_t n_samples, RngSeed seed) {
  validate_gaussian_spec(spec);
  if (n_samples == 0) throw std::invalid_argument("gaussian task: n_samples must be positive");
  Rng rng(seed);
  double sd = std::sqrt(spec.cov_scale);
  std::vector<InstanceSample> samples;
  samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    bool positive = rng.bernoulli(spec.prior_pi);
    const auto& mu = positive ? spec.mean_pos : spec.mean_neg;
    InstanceSample s;
    s.features.resize(spec.dim);
    for (int j = 0; j < spec.dim; ++j) s.features[j] = mu[j] + sd * rng.normal();
    s.label = positive ? 1 : -1;
    samples.push_back(std::move(s));
  }
  return make_labeled_pool(std::move(samples));
}

// ---------------------------------------------------------------------------
// CSV ingestion.

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

std::variant<LabeledPool, UnlabeledPool> ingest_csv_pool(
    const std::filesystem::path& path, bool has_labels,
    double declared_prior, PriorSource source) {
  std::ifstream in(path);
  if (!in) throw CsvParseError("cannot open " + path.string(), 0);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  std::vector<double> raw_labels;
  std::size_t width = 0;
  bool first_content_line = true;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') continue;  // provenance / comment lines
    auto fields = split_csv_line(line);
    if (first_content_line) {
      first_content_line = false;
      double probe;
      if (!parse_double(fields[0], probe)) {
        // Header row. When labels are expected the last column must be
        // named "label".
        if (has_labels && fields.back() != "label") {
          throw CsvParseError("expected last header column to be \"label\", got \"" + fields.back() + "\"",
                              line_no);
        }
        width = fields.size();
        continue;
      }
      width = fields.size();
    }
    if (fields.size() != width) {
      throw CsvParseError("row has " + std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(width),
                          line_no);
    }
    std::size_t n_features = has_labels ? width - 1 : width;
    if (has_labels && width < 2) {
      throw CsvParseError("labeled rows need at least one feature and a label", line_no);
    }
    std::vector<double> feats(n_features);
    for (std::size_t j = 0; j < n_features; ++j) {
      if (!parse_double(fields[j], feats[j])) {
        throw CsvParseError("cannot parse feature value \"" + fields[j] + "\"", line_no);
      }
    }
    if (has_labels) {
      double y;
      if (!parse_double(fields.back(), y) || (y != 1.0 && y != -1.0 && y != 0.0)) {
        throw CsvParseError("label must be one of {+1, 1, -1, 0}, got \"" + fields.back() + "\"",
                            line_no);
      }
      raw_labels.push_back(y);
    }
    rows.push_back(std::move(feats));
  }

  if (rows.empty()) throw CsvParseError("no data rows in " + path.string(), line_no);

  if (has_labels) {
    bool has_zero = std::find(raw_labels.begin(), raw_labels.end(), 0.0) != raw_labels.end();
    bool has_neg = std::find(raw_labels.begin(), raw_labels.end(), -1.0) != raw_labels.end();
    if (has_zero && has_neg) {
      throw CsvParseError("labels mix the {0,1} and {-1,+1} schemes", line_no);
    }
    std::vector<InstanceSample> samples;
    samples.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      int y = raw_labels[i] == 1.0 ? 1 : -1;  // 0 (and -1) map to -1
      samples.push_back(InstanceSample{std::move(rows[i]), y});
    }
    return make_labeled_pool(std::move(samples));
  }

  UnlabeledPool pool;
  pool.samples.reserve(rows.size());
  for (auto& r : rows) pool.samples.push_back(InstanceSample{std::move(r), std::nullopt});
  if (!(declared_prior > 0.0 && declared_prior < 1.0)) {
    throw std::invalid_argument("declared prior must lie in (0,1)");
  }
  pool.declared_prior = declared_prior;
  pool.prior_source = source;
  return pool;
}

// ---------------------------------------------------------------------------
// Tuple construction.

namespace {

// Expands the build spec into one (n, m) pair per tuple. Variable mixes
// are allocated by floor + largest remainder so exact fractions (e.g.
// 50/50) come out exact.
std::vector<std::pair<int, int>> expand_tuple_configs(const TupleBuildSpec& spec) {
  if (spec.n_tuples == 0) throw std::invalid_argument("tuple build: n_tuples must be positive");
  std::vector<TupleConfigWeight> configs;
  if (spec.variable_nm.has_value()) {
    configs = *spec.variable_nm;
    if (configs.empty()) throw std::invalid_argument("tuple build: empty variable (n,m) list");
    double wsum = 0.0;
    for (const auto& c : configs) {
      if (c.weight <= 0.0) throw std::invalid_argument("tuple build: weights must be positive");
      wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
      throw std::invalid_argument("tuple build: weights must sum to 1");
    }
  } else {
    configs.push_back({spec.n, spec.m, 1.0});
  }
  for (const auto& c : configs) {
    if (c.n < 1) throw InfeasibleDataError("tuple size n must be >= 1");
    if (c.m < 0 || c.m > c.n) {
      throw InfeasibleDataError("declared positive count m=" + std::to_string(c.m) +
                                " is infeasible for tuple size n=" + std::to_string(c.n));
    }
  }

  std::vector<std::size_t> counts(configs.size());
  std::vector<double> fractional(configs.size());
  std::size_t allocated = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    double exact = configs[i].weight * static_cast<double>(spec.n_tuples);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-12));
    fractional[i] = exact - static_cast<double>(counts[i]);
    allocated += counts[i];
  }
  std::vector<std::size_t> order(configs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fractional[a] > fractional[b]; });
  for (std::size_t k = 0; allocated < spec.n_tuples; ++k) {
    counts[order[k % order.size()]] += 1;
    ++allocated;
  }

  std::vector<std::pair<int, int>> out;
  out.reserve(spec.n_tuples);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    for (std::size_t k = 0; k < counts[i]; ++k) out.emplace_back(configs[i].n, configs[i].m);
  }
  return out;
}

}  // namespace

BuiltTuples build_tuples(const LabeledPool& pool, const TupleBuildSpec& spec, RngSeed seed) {
  auto configs = expand_tuple_configs(spec);

  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < pool.samples.size(); ++i) {
    if (*pool.samples[i].label == 1) {
      pos_idx.push_back(i);
    } else {
      neg_idx.push_back(i);
    }
  }

  std::size_t need_pos = 0, need_neg = 0;
  for (auto [n, m] : configs) {
    need_pos += static_cast<std::size_t>(m);
    need_neg += static_cast<std::size_t>(n - m);
  }

  Rng rng(seed);
  bool without = spec.replacement == Replacement::WithoutReplacement;
  if (without) {
    if (need_pos > pos_idx.size()) {
      throw InfeasibleDataError("tuple spec needs " + std::to_string(need_pos) +
                                " positive instances, pool has " + std::to_string(pos_idx.size()));
    }
    if (need_neg > neg_idx.size()) {
      throw InfeasibleDataError("tuple spec needs " + std::to_string(need_neg) +
                                " negative instances, pool has " + std::to_string(neg_idx.size()));
    }
    rng.shuffle(pos_idx);
    rng.shuffle(neg_idx);
  } else {
    if (need_pos > 0 && pos_idx.empty()) {
      throw InfeasibleDataError("tuple spec needs positive instances, pool has none");
    }
    if (need_neg > 0 && neg_idx.empty()) {
      throw InfeasibleDataError("tuple spec needs negative instances, pool has none");
    }
  }

  BuiltTuples out;
  out.dataset.tuples.reserve(configs.size());
  out.audit.labels.reserve(configs.size());
  out.audit.pool_indices.reserve(configs.size());

  std::size_t pos_cursor = 0, neg_cursor = 0;
  for (auto [n, m] : configs) {
    std::vector<std::size_t> slots;
    slots.reserve(n);
    for (int k = 0; k < m; ++k) {
      slots.push_back(without ? pos_idx[pos_cursor++] : pos_idx[rng.index(pos_idx.size())]);
    }
    for (int k = 0; k < n - m; ++k) {
      slots.push_back(without ? neg_idx[neg_cursor++] : neg_idx[rng.index(neg_idx.size())]);
    }
    rng.shuffle(slots);  // hide which slots carry the positives

    TupleRecord rec;
    rec.n = n;
    rec.m = m;
    rec.instances.reserve(n);
    std::vector<int> labels;
    labels.reserve(n);
    for (std::size_t idx : slots) {
      rec.instances.push_back(InstanceSample{pool.samples[idx].features, std::nullopt});
      labels.push_back(*pool.samples[idx].label);
    }
    out.dataset.tuples.push_back(std::move(rec));
    out.audit.labels.push_back(std::move(labels));
    out.audit.pool_indices.push_back(std::move(slots));
  }
  return out;
}

Flattened flatten(const TupleDataset& dataset) {
  Flattened out;
  out.instances.reserve(dataset.instance_count());
  for (const auto& t : dataset.tuples) {
    for (const auto& inst : t.instances) out.instances.push_back(inst);
  }
  out.alpha = dataset.effective_alpha();
  return out;
}

TupleDataset corrupt_counts(const TupleDataset& dataset, double flip_prob, RngSeed seed) {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
    throw std::invalid_argument("flip probability must lie in [0,1]");
  }
  Rng rng(seed);
  TupleDataset out = dataset;
  for (auto& t : out.tuples) {
    if (flip_prob > 0.0 && rng.bernoulli(flip_prob)) {
      int dir = rng.bernoulli(0.5) ? 1 : -1;
      t.m = std::clamp(t.m + dir, 0, t.n);
    }
  }
  return out;
}

UnlabeledPool pool_from_flatten(const TupleDataset& dataset) {
  auto flat = flatten(dataset);
  UnlabeledPool pool;
  pool.samples = std::move(flat.instances);
  pool.declared_prior = flat.alpha;
  pool.prior_source = PriorSource::KnownByConstruction;
  return pool;
}

// ---------------------------------------------------------------------------
// Serialization.

void write_pool_csv(std::ostream& os, const std::vector<InstanceSample>& samples,
                    bool with_labels, const std::string& provenance) {
  if (samples.empty()) throw std::invalid_argument("refusing to write an empty pool");
  if (!provenance.empty()) os << "# " << provenance << "\n";
  std::size_t dim = samples[0].features.size();
  for (std::size_t j = 0; j < dim; ++j) {
    if (j) os << ",";
    os << "f" << j;
  }
  if (with_labels) os << ",label";
  os << "\n";
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (j) os << ",";
      os << format_double(s.features[j]);
    }
    if (with_labels) {
      if (!s.label.has_value()) throw std::invalid_argument("sample lacks a label");
      os << "," << *s.label;
    }
    os << "\n";
  }
}

void write_tuples_jsonl(std::ostream& os, const TupleDataset& dataset) {
  std::size_t cursor = 0;
  for (const auto& t : dataset.tuples) {
    json j;
    j["n"] = t.n;
    j["m"] = t.m;
    std::vector<std::size_t> idx(t.instances.size());
    std::iota(idx.begin(), idx.end(), cursor);
    cursor += t.instances.size();
    j["instance_indices"] = idx;
    os << j.dump() << "\n";
  }
}

void write_tuple_instances_csv(std::ostream& os, const TupleDataset& dataset,
                               const std::string& provenance) {
  auto flat = flatten(dataset);
  write_pool_csv(os, flat.instances, /*with_labels=*/false, provenance);
}

void write_audit_csv(std::ostream& os, const TupleAudit& audit, const std::string& provenance) {
  if (!provenance.empty()) os << "# " << provenance << "\n";
  os << "tuple_idx,slot,pool_index,label\n";
  for (std::size_t t = 0; t < audit.labels.size(); ++t) {
    for (std::size_t s = 0; s < audit.labels[t].size(); ++s) {
      os << t << "," << s << "," << audit.pool_indices[t][s] << "," << audit.labels[t][s] << "\n";
    }
  }
}

TupleDataset read_tuples(const std::filesystem::path& jsonl_path,
                         const std::filesystem::path& instances_csv_path) {
  auto pool_variant = ingest_csv_pool(instances_csv_path, /*has_labels=*/false);
  auto& pool = std::get<UnlabeledPool>(pool_variant);

  std::ifstream in(jsonl_path);
  if (!in) throw CsvParseError("cannot open " + jsonl_path.string(), 0);
  TupleDataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw CsvParseError(std::string("bad tuple record: ") + e.what(), line_no);
    }
    TupleRecord rec;
    rec.n = j.at("n").get<int>();
    rec.m = j.at("m").get<int>();
    if (rec.m < 0 || rec.m > rec.n) {
      throw InfeasibleDataError("tuple record with m=" + std::to_string(rec.m) +
                                " outside [0, n=" + std::to_string(rec.n) + "]");
    }
    auto idx = j.at("instance_indices").get<std::vector<std::size_t>>();
    if (idx.size() != static_cast<std::size_t>(rec.n)) {
      throw CsvParseError("tuple lists " + std::to_string(idx.size()) + " instances but n=" +
                              std::to_string(rec.n),
                          line_no);
    }
    for (std::size_t i : idx) {
      if (i >= pool.samples.size()) {
        throw CsvParseError("instance index " + std::to_string(i) + " out of range", line_no);
      }
      rec.instances.push_back(pool.samples[i]);
    }
    dataset.tuples.push_back(std::move(rec));
  }
  if (dataset.tuples.empty()) throw CsvParseError("no tuples in " + jsonl_path.string(), line_no);
  return dataset;
}

TupleAudit read_audit_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvParseError("cannot open " + path.string(), 0);
  TupleAudit audit;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != 4) throw CsvParseError("audit rows have 4 fields", line_no);
    std::size_t t = std::stoull(fields[0]);
    std::size_t pool_index = std::stoull(fields[2]);
    int label = std::stoi(fields[3]);
    if (audit.labels.size() <= t) {
      audit.labels.resize(t + 1);
      audit.pool_indices.resize(t + 1);
    }
    audit.labels[t].push_back(label);
    audit.pool_indices[t].push_back(pool_index);
  }
  if (audit.labels.empty()) throw CsvParseError("no audit rows in " + path.string(), line_no);
  return audit;
}

}  // namespace ntmp::datagen
