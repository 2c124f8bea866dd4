#include "fixwal/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fixwal/error.hpp"

namespace fixwal {

PriorDistribution::PriorDistribution(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw Error(ErrorCode::kInvalidPrior, "empty prior");
  double sum = 0;
  for (double v : p_) {
    if (!(v >= 0) || !std::isfinite(v)) throw Error(ErrorCode::kInvalidPrior, "negative mass");
    sum += v;
  }
  if (sum == 0) throw Error(ErrorCode::kInvalidPrior, "all-zero prior");
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "prior sums to " << sum;
    throw Error(ErrorCode::kInvalidPrior, msg.str());
  }
}

PriorDistribution PriorDistribution::uniform(std::size_t groups) {
  std::vector<double> p(groups, 1.0 / static_cast<double>(groups));
  // Absorb rounding so the sum is exactly representable within tolerance.
  p.back() = 1.0 - std::accumulate(p.begin(), p.end() - 1, 0.0);
  return PriorDistribution(std::move(p));
}

namespace {

Posterior bayes(const PriorDistribution& prior, const std::vector<double>& likelihood) {
  Posterior out;
  out.q.resize(prior.groups());
  double evidence = 0;
  for (std::size_t i = 0; i < prior.groups(); ++i) evidence += likelihood[i] * prior[i];
  if (evidence <= 0) throw Error(ErrorCode::kInvalidPrior, "zero evidence");
  for (std::size_t i = 0; i < prior.groups(); ++i) out.q[i] = likelihood[i] * prior[i] / evidence;
  return out;
}

}  // namespace

Posterior posterior_vnos(const PriorDistribution& prior, std::size_t n_quorums) {
  const std::size_t K = prior.groups();
  if (K > n_quorums) {
    throw Error(ErrorCode::kInsufficientQuorums,
                std::to_string(K) + " groups need at least as many quorums");
  }
  // The likelihood is k/N; N cancels, so weighting by k keeps the result
  // bit-identical across N.
  std::vector<double> weight(K);
  for (std::size_t k = 1; k <= K; ++k) weight[k - 1] = static_cast<double>(k);
  return bayes(prior, weight);
}

Posterior posterior_fnos(const PriorDistribution& prior, std::size_t n_quorums) {
  const std::size_t K = prior.groups();
  const std::size_t N = n_quorums == 0 ? K : n_quorums;
  if (K > N) {
    throw Error(ErrorCode::kInsufficientQuorums,
                std::to_string(K) + " groups need at least as many quorums");
  }
  // A constant likelihood K/N leaves the prior unchanged.
  return Posterior{prior.values()};
}

namespace {

std::uint64_t shard_seed(std::uint64_t seed, std::uint64_t shard) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (shard + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct ShardTally {
  std::vector<std::uint64_t> conditioned;
  std::vector<std::uint64_t> groups;
  std::size_t max_per_quorum = 0;
};

void validate_simulation(const PriorDistribution& prior, SelectionScheme scheme,
                         std::size_t n_quorums, std::size_t max_segments, std::uint64_t trials) {
  if (trials < kMinSimulationTrials) {
    throw Error(ErrorCode::kInsufficientTrials,
                std::to_string(trials) + " trials, need " + std::to_string(kMinSimulationTrials));
  }
  if (prior.groups() > max_segments) {
    throw Error(ErrorCode::kInvalidPrior, "more groups than segments per write");
  }
  const std::size_t needed = scheme == SelectionScheme::kFnos ? max_segments : prior.groups();
  if (needed > n_quorums) {
    throw Error(ErrorCode::kInsufficientQuorums,
                "need " + std::to_string(needed) + " quorums, have " + std::to_string(n_quorums));
  }
}

ShardTally run_shard(const PriorDistribution& prior, SelectionScheme scheme,
                     std::size_t n_quorums, std::size_t max_segments, std::uint64_t trials,
                     std::uint64_t seed) {
  const std::size_t K = prior.groups();
  std::vector<double> cumulative(K);
  std::partial_sum(prior.values().begin(), prior.values().end(), cumulative.begin());
  ShardTally t{std::vector<std::uint64_t>(K, 0), std::vector<std::uint64_t>(K, 0), 0};
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * cumulative.back();
    std::size_t g = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    g = std::min(g, K - 1);
    ++t.groups[g];
    const auto placements = select_quorums(scheme, g + 1, n_quorums, max_segments, rng);
    picked.clear();
    for (const auto& p : placements) picked.push_back(p.quorum);
    std::sort(picked.begin(), picked.end());
    std::size_t run = picked.empty() ? 0 : 1;
    for (std::size_t i = 1; i < picked.size(); ++i) {
      run = picked[i] == picked[i - 1] ? run + 1 : 1;
      t.max_per_quorum = std::max(t.max_per_quorum, run);
    }
    t.max_per_quorum = std::max(t.max_per_quorum, run);
    if (!picked.empty() && picked.front() == 0) ++t.conditioned[g];
  }
  return t;
}

SimulationResult finish(std::vector<ShardTally>& shards, std::size_t K, std::uint64_t trials) {
  SimulationResult r;
  r.trials = trials;
  r.conditioned_counts.assign(K, 0);
  r.group_counts.assign(K, 0);
  for (const auto& s : shards) {
    for (std::size_t k = 0; k < K; ++k) {
      r.conditioned_counts[k] += s.conditioned[k];
      r.group_counts[k] += s.groups[k];
    }
    r.max_segments_per_quorum = std::max(r.max_segments_per_quorum, s.max_per_quorum);
  }
  r.conditioning_events =
      std::accumulate(r.conditioned_counts.begin(), r.conditioned_counts.end(), std::uint64_t{0});
  if (r.conditioning_events == 0) {
    throw Error(ErrorCode::kInsufficientTrials, "the designated quorum never saw a segment");
  }
  r.posterior.q.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    r.posterior.q[k] = static_cast<double>(r.conditioned_counts[k]) /
                       static_cast<double>(r.conditioning_events);
  }
  return r;
}

std::uint64_t shard_trials(std::uint64_t trials, std::size_t shard) {
  return trials / kSimulationShards + (shard < trials % kSimulationShards ? 1 : 0);
}

}  // namespace

SimulationResult simulate_posterior_serial(const PriorDistribution& prior, SelectionScheme scheme,
                                           std::size_t n_quorums, std::size_t max_segments,
                                           std::uint64_t trials, std::uint64_t seed) {
  validate_simulation(prior, scheme, n_quorums, max_segments, trials);
  std::vector<ShardTally> shards(kSimulationShards);
  for (std::size_t s = 0; s < kSimulationShards; ++s) {
    shards[s] = run_shard(prior, scheme, n_quorums, max_segments, shard_trials(trials, s),
                          shard_seed(seed, s));
  }
  return finish(shards, prior.groups(), trials);
}

SimulationResult simulate_posterior(const PriorDistribution& prior, SelectionScheme scheme,
                                    std::size_t n_quorums, std::size_t max_segments,
                                    std::uint64_t trials, std::uint64_t seed) {
  validate_simulation(prior, scheme, n_quorums, max_segments, trials);
  std::vector<ShardTally> shards(kSimulationShards);
  const auto n = static_cast<std::ptrdiff_t>(kSimulationShards);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    const auto shard = static_cast<std::size_t>(s);
    shards[shard] = run_shard(prior, scheme, n_quorums, max_segments,
                              shard_trials(trials, shard), shard_seed(seed, shard));
  }
  return finish(shards, prior.groups(), trials);
}

// ---- attack -----------------------------------------------------------------

const Interval* IntervalMapping::find(std::size_t wal_size) const {
  for (const auto& [size, interval] : entries) {
    if (size == wal_size) return &interval;
  }
  return nullptr;
}

std::size_t mapping_objective(const std::vector<LengthObservation>& data,
                              const IntervalMapping& mapping) {
  std::size_t total = 0;
  for (const auto& obs : data) {
    const Interval* iv = mapping.find(obs.wal_size);
    if (iv != nullptr && iv->contains(obs.length)) ++total;
  }
  return total;
}

IntervalMapping train_mapping(const std::vector<LengthObservation>& training) {
  if (training.empty()) throw Error(ErrorCode::kNoData, "empty training set");

  std::vector<std::size_t> sizes;
  std::vector<std::uint32_t> cuts{0};
  for (const auto& obs : training) {
    sizes.push_back(obs.wal_size);
    if (obs.length > 0) cuts.push_back(obs.length);
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const std::size_t m = sizes.size();
  const std::size_t L = cuts.size() - 1;

  // below[i][b]: observations with WAL size i and length <= cuts[b].
  std::vector<std::vector<long>> below(m, std::vector<long>(L + 1, 0));
  for (const auto& obs : training) {
    const auto i = static_cast<std::size_t>(
        std::lower_bound(sizes.begin(), sizes.end(), obs.wal_size) - sizes.begin());
    const auto b = static_cast<std::size_t>(
        std::lower_bound(cuts.begin(), cuts.end(), obs.length) - cuts.begin());
    ++below[i][b];
  }
  for (auto& row : below) std::partial_sum(row.begin(), row.end(), row.begin());

  // best[i][a]: optimum for intervals i..m-1 when interval i starts at cuts[a];
  // next[i][a]: smallest end index achieving it.
  std::vector<std::vector<long>> best(m, std::vector<long>(L + 1, 0));
  std::vector<std::vector<std::size_t>> next(m, std::vector<std::size_t>(L + 1, L));
  for (std::size_t a = 0; a <= L; ++a) best[m - 1][a] = below[m - 1][L] - below[m - 1][a];
  for (std::size_t i = m - 1; i-- > 0;) {
    long run = std::numeric_limits<long>::min();
    std::size_t arg = L;
    for (std::size_t b = L + 1; b-- > 0;) {
      const long v = below[i][b] + best[i + 1][b];
      if (v >= run) {
        run = v;
        arg = b;
      }
      best[i][b] = run - below[i][b];
      next[i][b] = arg;
    }
  }

  IntervalMapping mapping;
  std::size_t a = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = i + 1 == m ? L : next[i][a];
    mapping.entries.push_back({sizes[i], Interval{cuts[a], cuts[b]}});
    a = b;
  }
  return mapping;
}

int pred(std::uint32_t true_length, std::size_t wal_size, const IntervalMapping& mapping) {
  const Interval* iv = mapping.find(wal_size);
  if (iv == nullptr) {
    throw Error(ErrorCode::kUnknownSize, "WAL size " + std::to_string(wal_size));
  }
  return iv->contains(true_length) ? 1 : 0;
}

Evaluation evaluate_mapping(const std::vector<LengthObservation>& test,
                            const IntervalMapping& mapping) {
  if (test.empty()) throw Error(ErrorCode::kNoData, "empty test set");
  Evaluation ev;
  for (const auto& [size, interval] : mapping.entries) {
    SizeScore s;
    s.wal_size = size;
    s.interval = interval;
    ev.scores.push_back(s);
  }
  for (const auto& obs : test) {
    bool mapped = false;
    for (auto& s : ev.scores) {
      if (s.interval.contains(obs.length)) ++s.in_interval;
      if (s.wal_size == obs.wal_size) {
        mapped = true;
        ++s.predictions;
        if (s.interval.contains(obs.length)) ++s.correct;
      }
    }
    if (!mapped) ++ev.unmapped;
  }
  for (auto& s : ev.scores) {
    if (s.predictions > 0) s.precision = static_cast<double>(s.correct) / s.predictions;
    if (s.in_interval > 0) s.recall = static_cast<double>(s.correct) / s.in_interval;
  }
  return ev;
}

std::set<std::string> ReverseSizeMap::identifiable() const {
  std::set<std::string> out;
  for (const auto& [_, schemas] : schemas_by_size) {
    if (schemas.size() == 1) out.insert(*schemas.begin());
  }
  return out;
}

ReverseSizeMap reverse_size_map(const std::vector<SchemaObservation>& observations) {
  if (observations.empty()) throw Error(ErrorCode::kNoData, "no schema observations");
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& obs : observations) {
    auto& [sum, n] = sums[obs.schema];
    sum += static_cast<double>(obs.wal_size);
    ++n;
  }
  ReverseSizeMap out;
  for (const auto& [schema, acc] : sums) {
    out.schemas_by_size[acc.first / static_cast<double>(acc.second)].insert(schema);
  }
  for (const auto& [_, schemas] : out.schemas_by_size) ++out.histogram[schemas.size()];
  return out;
}

// ---- CSV --------------------------------------------------------------------

namespace {

std::vector<std::pair<std::string, std::string>> read_two_columns(std::istream& in,
                                                                  const std::string& header) {
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == header) continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::kInvalidSpec, "malformed CSV line '" + line + "'");
    }
    rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return rows;
}

std::uint64_t parse_uint(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw Error(ErrorCode::kInvalidSpec, "bad number '" + s + "'");
  return v;
}

}  // namespace

void write_length_csv(std::ostream& out, const std::vector<LengthObservation>& data) {
  out << "wal_size,length\n";
  for (const auto& d : data) out << d.wal_size << ',' << d.length << '\n';
}

std::vector<LengthObservation> read_length_csv(std::istream& in) {
  std::vector<LengthObservation> out;
  for (const auto& [a, b] : read_two_columns(in, "wal_size,length")) {
    out.push_back({parse_uint(a), static_cast<std::uint32_t>(parse_uint(b))});
  }
  return out;
}

void write_schema_csv(std::ostream& out, const std::vector<SchemaObservation>& data) {
  out << "wal_size,schema\n";
  for (const auto& d : data) out << d.wal_size << ',' << d.schema << '\n';
}

std::vector<SchemaObservation> read_schema_csv(std::istream& in) {
  std::vector<SchemaObservation> out;
  for (const auto& [a, b] : read_two_columns(in, "wal_size,schema")) {
    out.push_back({b, parse_uint(a)});
  }
  return out;
}

}  // namespace fixwal
