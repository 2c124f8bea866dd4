#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fixwal/bytes.hpp"
#include "fixwal/leakage.hpp"

namespace fixwal {

enum class SizeDistribution { kUniform, kZipf, kConstant };

struct WorkloadSpec {
  SizeDistribution distribution = SizeDistribution::kUniform;
  double alpha = 1.3;              // zipf only
  std::size_t constant_size = 80;  // constant only
  std::size_t attributes = 10;
  std::size_t max_attribute_size = 100;
  std::size_t op_count = 1000;
  std::uint64_t seed = 1;

  // Throws InvalidSpec.
  void validate() const;
  std::size_t max_payload() const { return attributes * max_attribute_size; }
  // "uniform", "zipf:1.3", "constant:80".
  std::string distribution_name() const;
};

// Parses a distribution string into spec (other fields untouched).
void parse_distribution(const std::string& text, WorkloadSpec& spec);

// Draws attribute sizes from {1..max} with P(s) proportional to s^-alpha.
class ZipfSampler {
 public:
  ZipfSampler(double alpha, std::size_t max_value);
  std::size_t operator()(std::mt19937_64& rng) const;
  double probability(std::size_t value) const;

 private:
  std::vector<double> cumulative_;
};

// Deterministic payload stream. Payload bytes are random; only sizes matter.
class WorkloadGenerator {
 public:
  explicit WorkloadGenerator(const WorkloadSpec& spec);

  std::size_t next_size();
  Bytes next();
  bool done() const { return produced_ >= spec_.op_count; }
  std::size_t produced() const { return produced_; }
  const WorkloadSpec& spec() const { return spec_; }
  // Independent generator for a concurrent driver.
  WorkloadGenerator clone(std::uint64_t stream) const;

 private:
  WorkloadSpec spec_;
  std::mt19937_64 rng_;
  // Separate stream so sizes do not depend on whether bytes are drawn.
  std::mt19937_64 bytes_rng_;
  ZipfSampler zipf_;
  std::size_t produced_ = 0;
};

std::vector<Bytes> generate(const WorkloadSpec& spec);
std::vector<std::size_t> generate_sizes(const WorkloadSpec& spec);

// Small, medium and large single-query payloads: 128, 512 and 1024 bytes.
std::vector<Bytes> single_query_set();

// Synthetic order records carrying a city name of 1..max_city_length
// characters; wal_size is the padded footprint of one full-sync write under
// the given segment size.
struct LengthTraceSpec {
  std::size_t count = 1000;
  std::size_t fixed_bytes = 100;
  // Other variable-width fields add 0..noise_bytes; 0 makes sizes separable.
  std::size_t noise_bytes = 16;
  std::size_t max_city_length = 30;
  std::size_t segment_size = 128;
  std::uint64_t seed = 1;
};
std::vector<LengthObservation> generate_length_trace(const LengthTraceSpec& spec);

// Labelled schema corpus with planted collisions: two sizes shared by three
// schemas, twelve shared by two, and fifty-five unique.
std::vector<SchemaObservation> generate_schema_corpus(std::size_t instances_per_schema,
                                                      std::uint64_t seed);

}  // namespace fixwal
