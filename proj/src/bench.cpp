#include "fixwal/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "fixwal/error.hpp"

namespace fixwal {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

constexpr std::uint32_t kBenchClientId = 100000;

}  // namespace

void BenchConfig::validate() const {
  SegmentParams{segment_size}.validate(slot_capacity);
  if (slot_capacity < kRecordHeaderSize + 4) {
    throw Error(ErrorCode::kInvalidConfig, "slot capacity too small");
  }
  if (flush_interval.count() <= 0) throw Error(ErrorCode::kInvalidConfig, "flush interval <= 0");
  if (backend == BackendKind::kQuorum) {
    QuorumConfig qc;
    qc.segment_size = segment_size;
    qc.max_write_size = max_write_size;
    qc.validate();
    if (slot_capacity > max_write_size) {
      throw Error(ErrorCode::kInvalidConfig,
                  "quorum backend needs slot_capacity <= max_write_size");
    }
    const std::size_t needed =
        selection == SelectionScheme::kFnos ? qc.max_segments() : div_ceil(slot_capacity, segment_size);
    if (replicas / 3 < needed) {
      throw Error(ErrorCode::kInvalidConfig, std::to_string(replicas) + " replicas form " +
                                                 std::to_string(replicas / 3) +
                                                 " groups, need " + std::to_string(needed));
    }
  }
}

std::string backend_name(BackendKind kind) {
  return kind == BackendKind::kJournal ? "journal" : "quorum";
}

std::string journal_mode_name(JournalMode mode) {
  switch (mode) {
    case JournalMode::kSegmented:
      return "segmented";
    case JournalMode::kUnpadded:
      return "unpadded";
    case JournalMode::kNaiveFullSlot:
      return "naive";
  }
  return "?";
}

std::string selection_name(SelectionScheme scheme) {
  return scheme == SelectionScheme::kVnos ? "vnos" : "fnos";
}

LatencySummary summarize_latencies(std::vector<double> micros) {
  LatencySummary s;
  s.samples = micros.size();
  if (micros.empty()) return s;
  std::sort(micros.begin(), micros.end());
  auto rank = [&](double p) {
    const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(micros.size())));
    return micros[std::clamp<std::size_t>(idx, 1, micros.size()) - 1];
  };
  s.mean_us = std::accumulate(micros.begin(), micros.end(), 0.0) / static_cast<double>(micros.size());
  s.p50_us = rank(0.50);
  s.p95_us = rank(0.95);
  s.p99_us = rank(0.99);
  s.max_us = micros.back();
  return s;
}

// ---- harness ----------------------------------------------------------------

BenchHarness::BenchHarness(BenchConfig config, ReplicaKey key)
    : config_(config), key_(std::move(key)) {
  config_.validate();
  if (key_.key_id.empty()) {
    key_.key_id = "bench";
    random_bytes(key_.material);
  }
  observed_ = std::make_unique<ObservedStorage>(memory_, config_.device);
  if (config_.backend == BackendKind::kQuorum) {
    bus_ = std::make_unique<InProcessBus>();
    registry_ = std::make_unique<Registry>();
    clock_ = std::make_unique<LogicalClock>();
    for (std::uint32_t id = 1; id <= config_.replicas; ++id) {
      bus_->add(std::make_shared<Replica>(id, kBenchClientId, *clock_));
      registry_->register_node(id, clock_->now());
    }
    registry_->register_node(kBenchClientId, clock_->now(), NodeRole::kClient);
    bus_->set_observer([this](const MessageEvent& e) {
      if (e.fake) {
        ++fake_unit_messages_;
      } else {
        ++real_unit_messages_;
      }
      unit_message_bytes_ += e.frame_size;
    });
  }
  build_engine();
}

BenchHarness::~BenchHarness() {
  engine_.reset();
  quorum_.reset();
  journal_.reset();
}

void BenchHarness::build_engine() {
  DurabilityBackend* backend = nullptr;
  if (config_.backend == BackendKind::kJournal) {
    JournalOptions jo;
    jo.segment_size = config_.segment_size;
    jo.slot_capacity = config_.slot_capacity;
    jo.mode = config_.journal_mode;
    jo.parallel_crypto = config_.parallel_crypto;
    journal_ = std::make_unique<JournalBackend>(*observed_, key_, jo);
    backend = journal_.get();
  } else {
    QuorumOptions qo;
    qo.config.segment_size = config_.segment_size;
    qo.config.max_write_size = config_.max_write_size;
    qo.scheme = config_.selection;
    qo.seed = config_.seed;
    qo.client_id = kBenchClientId;
    InProcessBus* bus = bus_.get();
    const std::uint64_t seed = config_.seed;
    quorum_ = std::make_unique<QuorumBackend>(
        *observed_, key_, qo, *registry_, *clock_,
        [bus, seed](std::uint32_t id) { return bus->connect(id, seed + id); });
    backend = quorum_.get();
  }
  EngineOptions eo;
  eo.slot_capacity = config_.slot_capacity;
  eo.flush_policy.interval = config_.flush_interval;
  engine_ = std::make_unique<WalEngine>(*backend, eo);
}

DurabilityBackend& BenchHarness::backend() {
  if (journal_) return *journal_;
  if (quorum_) return *quorum_;
  throw Error(ErrorCode::kInvalidConfig, "harness has crashed");
}

void BenchHarness::note_record(std::size_t payload_len) {
  baseline_bytes_ += encoded_record_size(payload_len);
}

void BenchHarness::crash() {
  if (crashed_) return;
  crashed_ = true;
  engine_.reset();
  if (quorum_) {
    const auto groups = quorum_->groups();
    quorum_.reset();
    for (const auto& g : groups) bus_->replica(g[0])->kill();
  }
  journal_.reset();
  memory_.crash();
}

std::vector<LogRecord> BenchHarness::recover() {
  if (config_.backend == BackendKind::kJournal) {
    JournalOptions jo;
    jo.segment_size = config_.segment_size;
    jo.slot_capacity = config_.slot_capacity;
    jo.mode = config_.journal_mode;
    jo.parallel_crypto = config_.parallel_crypto;
    return recover_journal(*observed_, key_, jo);
  }
  std::map<std::uint32_t, std::unique_ptr<ReplicaChannel>> channels;
  for (const auto& r : bus_->replicas()) channels[r->id()] = bus_->connect(r->id(), config_.seed);
  QuorumConfig qc;
  qc.segment_size = config_.segment_size;
  qc.max_write_size = config_.max_write_size;
  const Bytes stream = recover_assemble(*observed_, key_, qc, [&](std::uint32_t id) {
    auto it = channels.find(id);
    return it == channels.end() ? nullptr : it->second.get();
  });
  return scan_records(stream, "quorum");
}

void BenchHarness::account(BenchReport& report) const {
  report.bytes_written_baseline = baseline_bytes_.load();
  if (config_.backend == BackendKind::kJournal) {
    report.write_sizes = observed_->size_histogram(kJournalPrefix);
    report.bytes_written_actual = observed_->bytes_written(kJournalPrefix);
    report.write_count = observed_->write_count(kJournalPrefix);
    report.framing_bytes =
        config_.journal_mode == JournalMode::kSegmented ? report.write_count * kIvSize : 0;
  } else {
    // One copy of each real segment; replication and fakes are reported in
    // the write-size histogram only.
    const std::uint64_t units = real_unit_messages_.load() / 3;
    report.write_count = units;
    report.bytes_written_actual = units * stored_unit_size(config_.segment_size);
    report.framing_bytes = units * kIvSize;
    report.write_sizes = observed_->size_histogram(kMetadataPrefix);
  }
  report.bytes_written_padded = report.bytes_written_actual - report.framing_bytes;
  report.relative_cost =
      report.bytes_written_baseline == 0
          ? 0
          : static_cast<double>(report.bytes_written_padded) /
                static_cast<double>(report.bytes_written_baseline);
}

// ---- drivers ----------------------------------------------------------------

BenchReport run_sequential(const WorkloadSpec& spec, BenchHarness& harness) {
  BenchReport report;
  report.driver = "sequential";
  report.config = harness.config();
  report.workload = spec.distribution_name();
  WorkloadGenerator gen(spec);
  std::vector<double> latencies;
  latencies.reserve(spec.op_count);
  const auto start = Clock::now();
  try {
    while (!gen.done()) {
      const Bytes payload = gen.next();
      const auto t0 = Clock::now();
      harness.engine().append(payload, true);
      latencies.push_back(micros_since(t0));
      harness.note_record(payload.size());
      ++report.ops;
    }
  } catch (const std::exception& e) {
    report.partial = true;
    report.error = e.what();
  }
  report.elapsed_s = micros_since(start) / 1e6;
  report.throughput_ops = report.elapsed_s > 0 ? static_cast<double>(report.ops) / report.elapsed_s : 0;
  report.latency = summarize_latencies(std::move(latencies));
  harness.account(report);
  return report;
}

BenchReport run_concurrent(const WorkloadSpec& spec, BenchHarness& harness, std::size_t workers) {
  if (workers == 0) throw Error(ErrorCode::kInvalidConfig, "workers must be >= 1");
  const BenchConfig& cfg = harness.config();
  BenchReport report;
  report.driver = "concurrent";
  report.config = cfg;
  report.workload = spec.distribution_name();
  report.workers = workers;

  struct Worker {
    std::vector<double> latencies;
    std::size_t ops = 0;
    std::string error;
  };
  std::vector<Worker> results(workers);
  WorkloadGenerator base(spec);
  const bool timed = cfg.duration.count() > 0;

  if (cfg.periodic_flush) harness.engine().start_periodic_flush();
  const auto start = Clock::now();
  const auto deadline = start + cfg.duration;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      Worker& me = results[w];
      WorkloadSpec mine = spec;
      mine.op_count = timed ? std::numeric_limits<std::size_t>::max()
                            : spec.op_count / workers + (w < spec.op_count % workers ? 1 : 0);
      WorkloadGenerator gen = workers == 1 ? WorkloadGenerator(mine) : base.clone(w);
      std::size_t quota = mine.op_count;
      try {
        while (quota-- > 0) {
          if (timed && Clock::now() >= deadline) break;
          const Bytes payload = gen.next();
          const auto t0 = Clock::now();
          harness.engine().append(payload, false);
          me.latencies.push_back(micros_since(t0));
          harness.note_record(payload.size());
          ++me.ops;
          if (cfg.think_time.count() > 0) std::this_thread::sleep_for(cfg.think_time);
        }
      } catch (const std::exception& e) {
        me.error = e.what();
      }
    });
  }
  for (auto& t : threads) t.join();
  report.elapsed_s = micros_since(start) / 1e6;
  try {
    if (cfg.periodic_flush) harness.engine().stop_periodic_flush();
    harness.engine().flush();
  } catch (const std::exception& e) {
    report.partial = true;
    report.error = e.what();
  }

  std::vector<double> latencies;
  for (auto& r : results) {
    report.ops += r.ops;
    latencies.insert(latencies.end(), r.latencies.begin(), r.latencies.end());
    if (!r.error.empty()) {
      report.partial = true;
      if (report.error.empty()) report.error = r.error;
    }
  }
  report.throughput_ops = report.elapsed_s > 0 ? static_cast<double>(report.ops) / report.elapsed_s : 0;
  report.latency = summarize_latencies(std::move(latencies));
  harness.account(report);
  return report;
}

std::vector<BenchReport> run_concurrency_sweep(const WorkloadSpec& spec, const BenchConfig& config,
                                               const std::vector<std::size_t>& levels) {
  std::vector<BenchReport> out;
  for (std::size_t workers : levels) {
    BenchHarness harness(config);
    out.push_back(run_concurrent(spec, harness, workers));
  }
  return out;
}

std::size_t saturation_level(const std::vector<BenchReport>& sweep) {
  if (sweep.empty()) throw Error(ErrorCode::kNoData, "empty sweep");
  for (std::size_t i = 0; i + 1 < sweep.size(); ++i) {
    const double ideal = static_cast<double>(sweep[i + 1].workers) /
                         static_cast<double>(std::max<std::size_t>(sweep[i].workers, 1));
    const double gain = sweep[i].throughput_ops > 0
                            ? sweep[i + 1].throughput_ops / sweep[i].throughput_ops
                            : ideal;
    if (gain < 1.0 + 0.5 * (ideal - 1.0)) return sweep[i].workers;
  }
  return sweep.back().workers;
}

double relative_cost(const std::vector<std::size_t>& write_sizes, std::size_t segment_size) {
  if (write_sizes.empty()) throw Error(ErrorCode::kNoData, "no write sizes");
  if (segment_size == 0) throw Error(ErrorCode::kInvalidSegmentSize, "segment size 0");
  std::uint64_t padded = 0;
  std::uint64_t plain = 0;
  for (std::size_t l : write_sizes) {
    if (l == 0) throw Error(ErrorCode::kNoData, "zero-length write");
    padded += round_up(l, segment_size);
    plain += l;
  }
  return static_cast<double>(padded) / static_cast<double>(plain);
}

double naive_cost(const std::vector<std::size_t>& write_sizes, std::size_t slot_capacity) {
  if (write_sizes.empty()) throw Error(ErrorCode::kNoData, "no write sizes");
  std::uint64_t plain = 0;
  for (std::size_t l : write_sizes) {
    if (l == 0) throw Error(ErrorCode::kNoData, "zero-length write");
    plain += l;
  }
  return static_cast<double>(write_sizes.size()) * static_cast<double>(slot_capacity) /
         static_cast<double>(plain);
}

RecoveryMeasurement measure_recovery(const WorkloadSpec& spec, BenchHarness& harness,
                                     std::uint64_t crash_point) {
  RecoveryMeasurement m;
  const DeviceModel device = harness.storage().model();
  harness.storage().set_model({});

  WorkloadSpec unbounded = spec;
  unbounded.op_count = std::numeric_limits<std::size_t>::max();
  WorkloadGenerator gen(unbounded);
  std::vector<Bytes> committed;
  while (m.committed_bytes < crash_point) {
    Bytes payload = gen.next();
    harness.engine().append(payload, false);
    harness.note_record(payload.size());
    m.committed_bytes += encoded_record_size(payload.size());
    committed.push_back(std::move(payload));
  }
  harness.engine().flush();
  m.committed_records = committed.size();
  // Buffered but never flushed: lost by the crash. Only records that fit the
  // slot, since a full slot would flush them.
  Slot& slot = harness.engine().slot();
  for (int i = 0; i < 3; ++i) {
    Bytes payload = gen.next();
    if (slot.buffered() + encoded_record_size(payload.size()) > slot.capacity()) break;
    harness.engine().append(payload, false);
  }

  harness.crash();
  harness.storage().set_model(device);
  for (const auto& name : harness.storage().list()) {
    if (name.rfind(kJournalPrefix, 0) == 0 || name.rfind(kMetadataPrefix, 0) == 0) {
      m.log_bytes += harness.storage().size(name).value_or(0);
    }
  }
  const auto t0 = Clock::now();
  const auto records = harness.recover();
  m.recovery_time_ms = micros_since(t0) / 1000.0;
  m.recovered_records = records.size();

  m.prefix_matches = records.size() == committed.size();
  for (std::size_t i = 0; m.prefix_matches && i < records.size(); ++i) {
    Bytes expected = committed[i];
    expected.resize(round_up(expected.size(), 4), 0);
    m.prefix_matches = records[i].payload == expected;
  }
  return m;
}

// ---- output -----------------------------------------------------------------

namespace {

nlohmann::ordered_json config_json(const BenchConfig& c) {
  nlohmann::ordered_json j;
  j["backend"] = backend_name(c.backend);
  if (c.backend == BackendKind::kJournal) {
    j["journal_mode"] = journal_mode_name(c.journal_mode);
  } else {
    j["selection"] = selection_name(c.selection);
    j["replicas"] = c.replicas;
    j["max_write_size"] = c.max_write_size;
  }
  j["segment_size"] = c.segment_size;
  j["slot_capacity"] = c.slot_capacity;
  j["flush_interval_ms"] = c.flush_interval.count();
  j["periodic_flush"] = c.periodic_flush;
  j["think_time_us"] = c.think_time.count();
  j["duration_ms"] = c.duration.count();
  j["seed"] = c.seed;
  j["device"] = {{"write_latency_us", c.device.write_latency_us},
                 {"read_latency_us", c.device.read_latency_us},
                 {"bytes_per_us", c.device.bytes_per_us},
                 {"sleep", c.device.sleep}};
  return j;
}

nlohmann::ordered_json to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = "fixwal.bench_report/1";
  j["driver"] = r.driver;
  j["workload"] = r.workload;
  j["workers"] = r.workers;
  j["ops"] = r.ops;
  j["elapsed_s"] = r.elapsed_s;
  j["throughput_ops"] = r.throughput_ops;
  j["latency_us"] = {{"samples", r.latency.samples}, {"mean", r.latency.mean_us},
                     {"p50", r.latency.p50_us},      {"p95", r.latency.p95_us},
                     {"p99", r.latency.p99_us},      {"max", r.latency.max_us}};
  j["bytes_written_actual"] = r.bytes_written_actual;
  j["bytes_written_padded"] = r.bytes_written_padded;
  j["framing_bytes"] = r.framing_bytes;
  j["bytes_written_baseline"] = r.bytes_written_baseline;
  j["relative_cost"] = r.relative_cost;
  j["write_count"] = r.write_count;
  nlohmann::ordered_json sizes = nlohmann::ordered_json::object();
  for (const auto& [size, count] : r.write_sizes) sizes[std::to_string(size)] = count;
  j["write_sizes"] = sizes;
  j["recovery_time_ms"] = r.recovery_time_ms ? nlohmann::ordered_json(*r.recovery_time_ms) : nullptr;
  j["recovered_records"] =
      r.recovered_records ? nlohmann::ordered_json(*r.recovered_records) : nullptr;
  j["partial"] = r.partial;
  if (!r.error.empty()) j["error"] = r.error;
  j["config"] = config_json(r.config);
  return j;
}

}  // namespace

std::string report_json(const BenchReport& report, int indent) {
  return to_json(report).dump(indent);
}

std::string reports_json(const std::vector<BenchReport>& reports, int indent) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  return arr.dump(indent);
}

void write_reports_csv(std::ostream& out, const std::vector<BenchReport>& reports) {
  out << "driver,backend,segment_size,workload,workers,ops,elapsed_s,throughput_ops,"
         "p50_us,p95_us,p99_us,bytes_written_actual,bytes_written_padded,"
         "bytes_written_baseline,relative_cost,recovery_time_ms,partial\n";
  for (const auto& r : reports) {
    out << r.driver << ',' << backend_name(r.config.backend) << ',' << r.config.segment_size << ','
        << r.workload << ',' << r.workers << ',' << r.ops << ',' << r.elapsed_s << ','
        << r.throughput_ops << ',' << r.latency.p50_us << ',' << r.latency.p95_us << ','
        << r.latency.p99_us << ',' << r.bytes_written_actual << ',' << r.bytes_written_padded
        << ',' << r.bytes_written_baseline << ',' << r.relative_cost << ',';
    if (r.recovery_time_ms) out << *r.recovery_time_ms;
    out << ',' << (r.partial ? 1 : 0) << '\n';
  }
}

void write_curve_tsv(std::ostream& out, const std::vector<BenchReport>& reports) {
  out << "# workers\tthroughput_ops\tp50_us\tp95_us\tp99_us\n";
  for (const auto& r : reports) {
    out << r.workers << '\t' << r.throughput_ops << '\t' << r.latency.p50_us << '\t'
        << r.latency.p95_us << '\t' << r.latency.p99_us << '\n';
  }
}

void write_rc_tsv(std::ostream& out, const std::vector<std::size_t>& record_sizes,
                  const std::vector<std::size_t>& segment_sizes) {
  out << "# segment_size\trelative_cost\n";
  for (std::size_t s : segment_sizes) out << s << '\t' << relative_cost(record_sizes, s) << '\n';
}

}  // namespace fixwal
