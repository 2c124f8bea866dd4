#include "fixwal/workload.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "fixwal/error.hpp"
#include "fixwal/record.hpp"

namespace fixwal {

void WorkloadSpec::validate() const {
  if (attributes == 0 || max_attribute_size == 0) {
    throw Error(ErrorCode::kInvalidSpec, "attribute count and size must be positive");
  }
  switch (distribution) {
    case SizeDistribution::kZipf:
      if (!(alpha > 0) || !std::isfinite(alpha)) {
        throw Error(ErrorCode::kInvalidSpec, "zipf alpha must be > 0");
      }
      break;
    case SizeDistribution::kConstant:
      if (constant_size == 0 || constant_size > max_attribute_size) {
        throw Error(ErrorCode::kInvalidSpec,
                    "constant size must be in 1.." + std::to_string(max_attribute_size));
      }
      break;
    case SizeDistribution::kUniform:
      break;
  }
}

std::string WorkloadSpec::distribution_name() const {
  std::ostringstream out;
  switch (distribution) {
    case SizeDistribution::kUniform:
      out << "uniform";
      break;
    case SizeDistribution::kZipf:
      out << "zipf:" << alpha;
      break;
    case SizeDistribution::kConstant:
      out << "constant:" << constant_size;
      break;
  }
  return out.str();
}

void parse_distribution(const std::string& text, WorkloadSpec& spec) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto number = [&](auto& dst) {
    std::istringstream in(arg);
    in >> dst;
    if (arg.empty() || in.fail() || !in.eof()) {
      throw Error(ErrorCode::kInvalidSpec, "bad distribution argument in '" + text + "'");
    }
  };
  if (kind == "uniform" && arg.empty()) {
    spec.distribution = SizeDistribution::kUniform;
  } else if (kind == "zipf") {
    double alpha = 0;
    number(alpha);
    spec.distribution = SizeDistribution::kZipf;
    spec.alpha = alpha;
  } else if (kind == "constant") {
    long long c = 0;
    number(c);
    if (c <= 0) throw Error(ErrorCode::kInvalidSpec, "constant size must be positive");
    spec.distribution = SizeDistribution::kConstant;
    spec.constant_size = static_cast<std::size_t>(c);
  } else {
    throw Error(ErrorCode::kInvalidSpec, "unknown distribution '" + text + "'");
  }
  spec.validate();
}

ZipfSampler::ZipfSampler(double alpha, std::size_t max_value) : cumulative_(max_value) {
  double sum = 0;
  for (std::size_t s = 1; s <= max_value; ++s) {
    sum += std::pow(static_cast<double>(s), -alpha);
    cumulative_[s - 1] = sum;
  }
  for (double& c : cumulative_) c /= sum;
}

std::size_t ZipfSampler::operator()(std::mt19937_64& rng) const {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()) + 1,
                               cumulative_.size());
}

double ZipfSampler::probability(std::size_t value) const {
  if (value == 0 || value > cumulative_.size()) return 0;
  return cumulative_[value - 1] - (value > 1 ? cumulative_[value - 2] : 0.0);
}

WorkloadGenerator::WorkloadGenerator(const WorkloadSpec& spec)
    : spec_(spec),
      rng_(spec.seed),
      bytes_rng_(spec.seed ^ 0xD1B54A32D192ED03ull),
      zipf_(spec.distribution == SizeDistribution::kZipf ? spec.alpha : 1.0,
            spec.max_attribute_size) {
  spec_.validate();
}

std::size_t WorkloadGenerator::next_size() {
  std::size_t total = 0;
  for (std::size_t a = 0; a < spec_.attributes; ++a) {
    switch (spec_.distribution) {
      case SizeDistribution::kUniform:
        total += 1 + static_cast<std::size_t>(rng_() % spec_.max_attribute_size);
        break;
      case SizeDistribution::kZipf:
        total += zipf_(rng_);
        break;
      case SizeDistribution::kConstant:
        total += spec_.constant_size;
        break;
    }
  }
  ++produced_;
  return total;
}

Bytes WorkloadGenerator::next() {
  Bytes payload(next_size());
  for (std::size_t i = 0; i < payload.size(); i += 8) {
    std::uint64_t word = bytes_rng_();
    for (std::size_t j = i; j < std::min(i + 8, payload.size()); ++j) {
      payload[j] = static_cast<std::uint8_t>(word);
      word >>= 8;
    }
  }
  return payload;
}

WorkloadGenerator WorkloadGenerator::clone(std::uint64_t stream) const {
  WorkloadSpec s = spec_;
  s.seed = spec_.seed ^ (0x9E3779B97F4A7C15ull * (stream + 1));
  return WorkloadGenerator(s);
}

std::vector<Bytes> generate(const WorkloadSpec& spec) {
  WorkloadGenerator gen(spec);
  std::vector<Bytes> out;
  out.reserve(spec.op_count);
  while (!gen.done()) out.push_back(gen.next());
  return out;
}

std::vector<std::size_t> generate_sizes(const WorkloadSpec& spec) {
  WorkloadGenerator gen(spec);
  std::vector<std::size_t> out;
  out.reserve(spec.op_count);
  while (!gen.done()) out.push_back(gen.next_size());
  return out;
}

std::vector<Bytes> single_query_set() {
  std::mt19937_64 rng(0x51);
  std::vector<Bytes> out;
  for (std::size_t n : {128u, 512u, 1024u}) {
    Bytes p(n);
    for (auto& b : p) b = static_cast<std::uint8_t>(rng());
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<LengthObservation> generate_length_trace(const LengthTraceSpec& spec) {
  if (spec.count == 0 || spec.max_city_length == 0) {
    throw Error(ErrorCode::kInvalidSpec, "empty length trace");
  }
  std::mt19937_64 rng(spec.seed);
  // Short names are more common than long ones.
  ZipfSampler lengths(0.6, spec.max_city_length);
  std::vector<LengthObservation> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::size_t len = lengths(rng);
    const std::size_t noise = spec.noise_bytes == 0 ? 0 : rng() % (spec.noise_bytes + 1);
    const std::size_t record = encoded_record_size(spec.fixed_bytes + noise + len);
    out.push_back({round_up(record, spec.segment_size), static_cast<std::uint32_t>(len)});
  }
  return out;
}

std::vector<SchemaObservation> generate_schema_corpus(std::size_t instances_per_schema,
                                                      std::uint64_t seed) {
  if (instances_per_schema == 0) throw Error(ErrorCode::kInvalidSpec, "no instances");
  std::mt19937_64 rng(seed);
  constexpr std::size_t kUnit = 128;
  // (schemas sharing the size, number of such sizes)
  const std::vector<std::pair<std::size_t, std::size_t>> layout{{3, 2}, {2, 12}, {1, 55}};
  std::vector<SchemaObservation> out;
  std::size_t size_index = 0;
  std::size_t schema_index = 0;
  for (const auto& [per_size, sizes] : layout) {
    for (std::size_t s = 0; s < sizes; ++s, ++size_index) {
      const std::size_t mean = kUnit * (4 + 2 * size_index);
      for (std::size_t k = 0; k < per_size; ++k, ++schema_index) {
        std::ostringstream name;
        name << "schema-" << std::setw(3) << std::setfill('0') << schema_index;
        // Instances come in symmetric pairs so the mean is exactly `mean`.
        for (std::size_t i = 0; i + 1 < instances_per_schema; i += 2) {
          const std::size_t d = kUnit * (rng() % 3);
          out.push_back({name.str(), mean - d});
          out.push_back({name.str(), mean + d});
        }
        if (instances_per_schema % 2 == 1) out.push_back({name.str(), mean});
      }
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace fixwal
