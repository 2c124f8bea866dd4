#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fixwal/quorum.hpp"

namespace fixwal {

// P(AS in Range_k) for k = 1..K, stored at index k-1.
class PriorDistribution {
 public:
  // Throws InvalidPrior on negative entries, an all-zero vector, or a sum
  // further than 1e-9 from one.
  explicit PriorDistribution(std::vector<double> p);
  static PriorDistribution uniform(std::size_t groups);

  std::size_t groups() const { return p_.size(); }
  double operator[](std::size_t group_index) const { return p_[group_index]; }
  const std::vector<double>& values() const { return p_; }

 private:
  std::vector<double> p_;
};

// P(AS in Range_k | R_m = 1), index k-1.
struct Posterior {
  std::vector<double> q;
};

// Replica m sees a segment with probability k/N for a group-k write.
Posterior posterior_vnos(const PriorDistribution& prior, std::size_t n_quorums);
// Every write draws K quorums, so the likelihood is K/N for all groups.
Posterior posterior_fnos(const PriorDistribution& prior, std::size_t n_quorums = 0);

struct SimulationResult {
  Posterior posterior;
  std::vector<std::uint64_t> conditioned_counts;  // group-k writes seen by the designated quorum
  std::vector<std::uint64_t> group_counts;        // unconditional draws per group
  std::uint64_t conditioning_events = 0;
  std::uint64_t trials = 0;
  // Largest number of segments any single quorum received from one write.
  std::size_t max_segments_per_quorum = 0;

  bool operator==(const SimulationResult& o) const {
    return conditioned_counts == o.conditioned_counts && group_counts == o.group_counts &&
           conditioning_events == o.conditioning_events && trials == o.trials &&
           max_segments_per_quorum == o.max_segments_per_quorum;
  }
};

inline constexpr std::uint64_t kMinSimulationTrials = 10000;
inline constexpr std::size_t kSimulationShards = 64;

// Draws a write group from the prior, runs quorum selection, and conditions
// on quorum 0 receiving a segment. Trials are split into fixed seeded shards,
// so the result depends only on the seed, not on the thread count.
SimulationResult simulate_posterior(const PriorDistribution& prior, SelectionScheme scheme,
                                    std::size_t n_quorums, std::size_t max_segments,
                                    std::uint64_t trials, std::uint64_t seed);
// Reference implementation: the same shards run one after another.
SimulationResult simulate_posterior_serial(const PriorDistribution& prior, SelectionScheme scheme,
                                           std::size_t n_quorums, std::size_t max_segments,
                                           std::uint64_t trials, std::uint64_t seed);

// ---- size-inference attack --------------------------------------------------

struct LengthObservation {
  std::size_t wal_size = 0;
  std::uint32_t length = 0;  // true length of the secret field
};

// Left-open, right-closed (lo, hi].
struct Interval {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;

  bool contains(std::uint32_t v) const { return lo < v && v <= hi; }
  bool operator==(const Interval&) const = default;
};

// One interval per distinct WAL size, contiguous and increasing with size.
struct IntervalMapping {
  std::vector<std::pair<std::size_t, Interval>> entries;

  const Interval* find(std::size_t wal_size) const;
  bool operator==(const IntervalMapping&) const = default;
};

// Number of observations whose length lies in the interval of their WAL size.
std::size_t mapping_objective(const std::vector<LengthObservation>& data,
                              const IntervalMapping& mapping);

// Exact maximiser of mapping_objective over contiguous monotone partitions of
// (0, max length] with boundaries at observed lengths. Ties go to the
// lexicographically smallest boundary vector. Throws NoData.
IntervalMapping train_mapping(const std::vector<LengthObservation>& training);

// Throws UnknownSize if the WAL size has no interval.
int pred(std::uint32_t true_length, std::size_t wal_size, const IntervalMapping& mapping);

struct SizeScore {
  std::size_t wal_size = 0;
  Interval interval;
  std::size_t predictions = 0;  // test items with this WAL size
  std::size_t correct = 0;
  std::size_t in_interval = 0;  // test items whose true length is in the interval
  std::optional<double> precision;
  std::optional<double> recall;
};

struct Evaluation {
  std::vector<SizeScore> scores;
  std::size_t unmapped = 0;  // test items whose WAL size has no interval
};

// Precision per WAL size, recall per interval; empty cells stay undefined.
Evaluation evaluate_mapping(const std::vector<LengthObservation>& test,
                            const IntervalMapping& mapping);

struct SchemaObservation {
  std::string schema;
  std::size_t wal_size = 0;
};

struct ReverseSizeMap {
  std::map<double, std::set<std::string>> schemas_by_size;  // keyed by mean WAL size
  std::map<std::size_t, std::size_t> histogram;             // schemas per size -> sizes
  std::set<std::string> identifiable() const;
};

ReverseSizeMap reverse_size_map(const std::vector<SchemaObservation>& observations);

// CSV: header "wal_size,length" / "wal_size,schema".
void write_length_csv(std::ostream& out, const std::vector<LengthObservation>& data);
std::vector<LengthObservation> read_length_csv(std::istream& in);
void write_schema_csv(std::ostream& out, const std::vector<SchemaObservation>& data);
std::vector<SchemaObservation> read_schema_csv(std::istream& in);

}  // namespace fixwal
