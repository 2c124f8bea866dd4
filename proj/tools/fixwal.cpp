// fixwal: command-line front end for the engine, the leakage toolkit and the
// benchmark drivers.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fixwal/bench.hpp"
#include "fixwal/error.hpp"
#include "fixwal/journal.hpp"
#include "fixwal/leakage.hpp"
#include "fixwal/quorum_backend.hpp"
#include "fixwal/workload.hpp"

namespace {

using namespace fixwal;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitOperational = 1;
constexpr int kExitUsage = 2;

// Thrown for bad flag values that CLI11 cannot check by itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  // shared configuration; the config file supplies defaults for these
  std::size_t segment_size = kDefaultSegmentSize;
  std::size_t slot_capacity = 0;  // 0: 128 KiB, or MS for the quorum backend
  long flush_interval_ms = 100;
  std::string scheme = "journal";
  std::string selection = "vnos";
  std::size_t replicas = 30;
  std::size_t max_write_size = 1024;
  long checkpoint_interval_s = 60;
  std::string key_file;
  std::uint64_t seed = 1;
  std::string out = "human";

  // workload
  std::string dist = "uniform";
  std::size_t ops = 1000;

  // bench
  std::string mode = "segmented";
  std::string workers = "1,2,4,8,16";
  long think_us = 0;
  long duration_ms = 0;
  bool no_periodic = false;
  double dev_write_us = 0;
  double dev_read_us = 0;
  double dev_bw = 0;
  bool dev_sleep = false;
  std::string sizes_mb = "1,2,4";
  std::string segment_list = "32,64,128,256,512,1024,4096";

  // journal directory commands
  std::string dir;
  std::size_t checkpoint_every = 0;
  std::size_t dump = 0;

  // leakage
  std::string prior;
  std::size_t quorums = 0;
  std::size_t max_segments = 0;
  std::uint64_t trials = 100000;
  bool serial = false;

  // attack / gen
  std::string trace;
  std::string test_trace;
  std::string model;
  std::size_t count = 1000;
  std::size_t fixed_bytes = 100;
  std::size_t noise_bytes = 16;
  std::size_t max_city = 30;
  std::size_t instances = 6;
  std::string what = "workload";
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  for (const auto& item : split(text, ',')) {
    std::istringstream in(item);
    T v{};
    in >> v;
    if (in.fail() || !in.eof()) throw UsageError(std::string("bad ") + what + " '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

bool machine(const Options& o) { return o.out == "json"; }

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string joined(const std::vector<double>& v, int digits = 4) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fixed(v[i], digits);
  return s;
}

WorkloadSpec workload_from(const Options& o) {
  WorkloadSpec spec;
  spec.op_count = o.ops;
  spec.seed = o.seed;
  try {
    parse_distribution(o.dist, spec);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return spec;
}

SelectionScheme selection_from(const std::string& s) {
  if (s == "vnos") return SelectionScheme::kVnos;
  if (s == "fnos") return SelectionScheme::kFnos;
  throw UsageError("selection must be vnos or fnos");
}

JournalMode mode_from(const std::string& s) {
  if (s == "segmented") return JournalMode::kSegmented;
  if (s == "unpadded") return JournalMode::kUnpadded;
  if (s == "naive") return JournalMode::kNaiveFullSlot;
  throw UsageError("mode must be segmented, unpadded or naive");
}

BenchConfig bench_config_from(const Options& o) {
  BenchConfig c;
  if (o.scheme == "journal") {
    c.backend = BackendKind::kJournal;
  } else if (o.scheme == "quorum") {
    c.backend = BackendKind::kQuorum;
  } else {
    throw UsageError("scheme must be journal or quorum");
  }
  c.journal_mode = mode_from(o.mode);
  c.segment_size = o.segment_size;
  c.selection = selection_from(o.selection);
  c.replicas = o.replicas;
  c.max_write_size = o.max_write_size;
  c.slot_capacity = o.slot_capacity != 0 ? o.slot_capacity
                    : c.backend == BackendKind::kQuorum ? o.max_write_size
                                                         : kDefaultSlotCapacity;
  c.flush_interval = std::chrono::milliseconds(o.flush_interval_ms);
  c.periodic_flush = !o.no_periodic;
  c.device = {o.dev_write_us, o.dev_read_us, o.dev_bw, o.dev_sleep};
  c.think_time = std::chrono::microseconds(o.think_us);
  c.duration = std::chrono::milliseconds(o.duration_ms);
  c.seed = o.seed;
  if (o.checkpoint_interval_s <= 0) throw UsageError("checkpoint interval must be positive");
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

ReplicaKey resolve_key(const Options& o) {
  if (std::getenv("FIXWAL_KEY") != nullptr) return EnvKeyProvider().get("env");
  if (o.key_file.empty()) {
    throw UsageError("no key: set FIXWAL_KEY (64 hex digits) or pass --key-file");
  }
  return FileKeyProvider(o.key_file).get_or_create("journal");
}

JournalOptions journal_options_from(const Options& o) {
  JournalOptions jo;
  jo.segment_size = o.segment_size;
  jo.slot_capacity = o.slot_capacity != 0 ? o.slot_capacity : kDefaultSlotCapacity;
  jo.mode = mode_from(o.mode);
  try {
    SegmentParams{jo.segment_size}.validate(jo.slot_capacity);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return jo;
}

// ---- bench ------------------------------------------------------------------

void print_report_human(const BenchReport& r) {
  std::cout << r.driver << " | " << backend_name(r.config.backend) << " S=" << r.config.segment_size
            << " workload=" << r.workload << " workers=" << r.workers << '\n'
            << "  ops                " << r.ops << " in " << fixed(r.elapsed_s, 3) << " s ("
            << fixed(r.throughput_ops, 1) << " ops/s)\n"
            << "  latency us         p50 " << fixed(r.latency.p50_us, 1) << "  p95 "
            << fixed(r.latency.p95_us, 1) << "  p99 " << fixed(r.latency.p99_us, 1) << '\n'
            << "  bytes actual       " << r.bytes_written_actual << " (framing "
            << r.framing_bytes << ")\n"
            << "  bytes padded       " << r.bytes_written_padded << '\n'
            << "  bytes baseline     " << r.bytes_written_baseline << '\n'
            << "  relative cost      " << fixed(r.relative_cost) << '\n'
            << "  storage writes     " << r.write_count;
  if (!r.write_sizes.empty()) {
    std::cout << " sizes";
    for (const auto& [size, n] : r.write_sizes) std::cout << ' ' << size << 'x' << n;
  }
  std::cout << '\n';
  if (r.recovery_time_ms) {
    std::cout << "  recovery           " << fixed(*r.recovery_time_ms, 2) << " ms, "
              << r.recovered_records.value_or(0) << " records\n";
  }
  if (r.partial) std::cout << "  PARTIAL: " << r.error << '\n';
}

void emit_reports(const Options& o, const std::vector<BenchReport>& reports) {
  if (o.out == "json") {
    std::cout << (reports.size() == 1 ? report_json(reports[0]) : reports_json(reports)) << '\n';
  } else if (o.out == "csv") {
    write_reports_csv(std::cout, reports);
  } else if (o.out == "tsv") {
    write_curve_tsv(std::cout, reports);
  } else {
    for (const auto& r : reports) print_report_human(r);
  }
}

int cmd_bench_seq(const Options& o) {
  const auto spec = workload_from(o);
  BenchHarness harness(bench_config_from(o));
  const auto report = run_sequential(spec, harness);
  emit_reports(o, {report});
  return report.partial ? kExitOperational : kExitOk;
}

int cmd_bench_conc(const Options& o) {
  const auto spec = workload_from(o);
  const auto config = bench_config_from(o);
  const auto levels = parse_list<std::size_t>(o.workers, "worker count");
  const auto sweep = run_concurrency_sweep(spec, config, levels);
  emit_reports(o, sweep);
  if (o.out == "human" && sweep.size() > 1) {
    std::cout << "saturation at " << saturation_level(sweep) << " workers\n";
  }
  for (const auto& r : sweep) {
    if (r.partial) return kExitOperational;
  }
  return kExitOk;
}

int cmd_bench_recovery(const Options& o) {
  const auto spec = workload_from(o);
  const auto config = bench_config_from(o);
  std::vector<BenchReport> reports;
  bool ok = true;
  for (double mb : parse_list<double>(o.sizes_mb, "size")) {
    BenchHarness harness(config);
    const auto m = measure_recovery(spec, harness, static_cast<std::uint64_t>(mb * (1 << 20)));
    BenchReport r;
    r.driver = "recovery";
    r.config = config;
    r.workload = spec.distribution_name();
    r.ops = m.committed_records;
    harness.account(r);
    r.recovery_time_ms = m.recovery_time_ms;
    r.recovered_records = m.recovered_records;
    if (!m.prefix_matches) {
      r.partial = true;
      r.error = "recovered records differ from the committed prefix";
      ok = false;
    }
    reports.push_back(r);
  }
  emit_reports(o, reports);
  return ok ? kExitOk : kExitOperational;
}

int cmd_bench_rc(const Options& o) {
  const auto sizes = generate_sizes(workload_from(o));
  std::vector<std::size_t> records;
  for (auto s : sizes) records.push_back(encoded_record_size(s));
  const auto segments = parse_list<std::size_t>(o.segment_list, "segment size");
  const std::size_t slot = o.slot_capacity != 0 ? o.slot_capacity : kDefaultSlotCapacity;
  if (o.out == "json") {
    json j;
    j["schema"] = "fixwal.relative_cost/1";
    j["workload"] = workload_from(o).distribution_name();
    j["writes"] = records.size();
    json rows = json::array();
    for (auto s : segments) rows.push_back({{"segment_size", s}, {"relative_cost", relative_cost(records, s)}});
    j["segmented"] = rows;
    j["naive_slot_capacity"] = slot;
    j["naive_cost"] = naive_cost(records, slot);
    std::cout << j.dump(2) << '\n';
  } else if (o.out == "tsv") {
    write_rc_tsv(std::cout, records, segments);
  } else {
    std::cout << "segment_size,relative_cost\n";
    for (auto s : segments) std::cout << s << ',' << fixed(relative_cost(records, s)) << '\n';
    std::cout << "naive(" << slot << ")," << fixed(naive_cost(records, slot), 2) << '\n';
  }
  return kExitOk;
}

// ---- journal directory --------------------------------------------------------

int cmd_write(const Options& o) {
  if (o.dir.empty()) throw UsageError("--dir is required");
  const auto spec = workload_from(o);
  const auto jo = journal_options_from(o);
  const auto key = resolve_key(o);
  DirectoryStorage storage(o.dir);
  JournalBackend backend(storage, key, jo);
  EngineOptions eo;
  eo.slot_capacity = jo.slot_capacity;
  WalEngine engine(backend, eo);
  WorkloadGenerator gen(spec);
  std::size_t written = 0;
  std::size_t checkpoints = 0;
  while (!gen.done()) {
    engine.append(gen.next(), true);
    ++written;
    if (o.checkpoint_every != 0 && written % o.checkpoint_every == 0) {
      const auto marker = engine.checkpoint();
      backend.gc_journal(marker);
      ++checkpoints;
    }
  }
  engine.flush();
  if (machine(o)) {
    json j{{"schema", "fixwal.write/1"}, {"records", written}, {"checkpoints", checkpoints},
           {"file_id", backend.file_id()}};
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "wrote " << written << " records, " << checkpoints << " checkpoints, current file "
              << journal_file_name(backend.file_id()) << '\n';
  }
  return kExitOk;
}

int cmd_recover(const Options& o) {
  if (o.dir.empty()) throw UsageError("--dir is required");
  const auto jo = journal_options_from(o);
  const auto key = resolve_key(o);
  DirectoryStorage storage(o.dir);
  JournalBackend backend(storage, key, jo);
  const auto marker = backend.read_checkpoint();
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = backend.recover();
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::uint64_t payload_bytes = 0;
  std::size_t checkpoint_records = 0;
  for (const auto& r : records) {
    payload_bytes += r.payload.size();
    if (r.header.flags & record_flags::kCheckpoint) ++checkpoint_records;
  }
  if (machine(o)) {
    json j;
    j["schema"] = "fixwal.recover/1";
    j["records"] = records.size();
    j["checkpoint_records"] = checkpoint_records;
    j["payload_bytes"] = payload_bytes;
    j["recovery_time_ms"] = ms;
    j["journal_files"] = backend.journal_files();
    j["checkpoint"] = marker ? json{{"ckpt_id", marker->ckpt_id},
                                    {"file_id", marker->lsn.file_id},
                                    {"offset", marker->lsn.offset}}
                             : json(nullptr);
    json dumped = json::array();
    for (std::size_t i = 0; i < std::min(o.dump, records.size()); ++i) {
      dumped.push_back({{"flags", records[i].header.flags},
                        {"length", records[i].payload.size()},
                        {"payload_hex", to_hex(records[i].payload)}});
    }
    if (o.dump != 0) j["dump"] = dumped;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "checkpoint       ";
    if (marker) {
      std::cout << "id " << marker->ckpt_id << " at " << journal_file_name(marker->lsn.file_id)
                << '+' << marker->lsn.offset << '\n';
    } else {
      std::cout << "none\n";
    }
    std::cout << "journal files    " << backend.journal_files().size() << '\n'
              << "records          " << records.size() << " (" << checkpoint_records
              << " checkpoint)\n"
              << "payload bytes    " << payload_bytes << '\n'
              << "recovery time    " << fixed(ms, 2) << " ms\n";
    for (std::size_t i = 0; i < std::min(o.dump, records.size()); ++i) {
      const auto& p = records[i].payload;
      std::cout << "  #" << i << " len " << p.size() << ' '
                << to_hex(ByteView(p.data(), std::min<std::size_t>(p.size(), 16)))
                << (p.size() > 16 ? "..." : "") << '\n';
    }
  }
  return kExitOk;
}

// ---- leakage ------------------------------------------------------------------

PriorDistribution prior_from(const Options& o) {
  if (o.prior.empty()) throw UsageError("--prior is required");
  try {
    return PriorDistribution(parse_list<double>(o.prior, "prior entry"));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

int cmd_leak_posterior(const Options& o) {
  const auto prior = prior_from(o);
  const auto scheme = selection_from(o.selection);
  const std::size_t n = o.quorums != 0 ? o.quorums : prior.groups();
  const auto q = scheme == SelectionScheme::kVnos ? posterior_vnos(prior, n) : posterior_fnos(prior, n);
  if (machine(o)) {
    json j{{"schema", "fixwal.posterior/1"}, {"scheme", selection_name(scheme)}, {"quorums", n},
           {"prior", prior.values()}, {"posterior", q.q}};
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << joined(q.q) << '\n';
  }
  return kExitOk;
}

int cmd_leak_simulate(const Options& o) {
  const auto prior = prior_from(o);
  const auto scheme = selection_from(o.selection);
  const std::size_t k = o.max_segments != 0 ? o.max_segments : prior.groups();
  const std::size_t n = o.quorums != 0 ? o.quorums : 10;
  if (o.trials < kMinSimulationTrials) {
    throw UsageError("--trials must be at least " + std::to_string(kMinSimulationTrials));
  }
  const auto r = o.serial ? simulate_posterior_serial(prior, scheme, n, k, o.trials, o.seed)
                          : simulate_posterior(prior, scheme, n, k, o.trials, o.seed);
  const auto closed = scheme == SelectionScheme::kVnos ? posterior_vnos(prior, n) : posterior_fnos(prior, n);
  double max_dev = 0;
  for (std::size_t i = 0; i < prior.groups(); ++i) {
    max_dev = std::max(max_dev, std::abs(r.posterior.q[i] - closed.q[i]));
  }
  if (machine(o)) {
    json j{{"schema", "fixwal.simulation/1"},
           {"scheme", selection_name(scheme)},
           {"quorums", n},
           {"max_segments", k},
           {"trials", r.trials},
           {"seed", o.seed},
           {"prior", prior.values()},
           {"empirical", r.posterior.q},
           {"closed_form", closed.q},
           {"max_abs_deviation", max_dev},
           {"conditioning_events", r.conditioning_events},
           {"group_counts", r.group_counts},
           {"max_segments_per_quorum", r.max_segments_per_quorum}};
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "empirical    " << joined(r.posterior.q) << '\n'
              << "closed form  " << joined(closed.q) << '\n'
              << "max |diff|   " << fixed(max_dev) << '\n'
              << "events       " << r.conditioning_events << " of " << r.trials << " writes\n"
              << "max segments per quorum per write: " << r.max_segments_per_quorum << '\n';
  }
  return kExitOk;
}

// ---- attack -------------------------------------------------------------------

std::vector<LengthObservation> load_lengths(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNoData, "cannot open " + path);
  return read_length_csv(in);
}

json mapping_json(const IntervalMapping& m) {
  json arr = json::array();
  for (const auto& [size, iv] : m.entries) arr.push_back({{"wal_size", size}, {"lo", iv.lo}, {"hi", iv.hi}});
  return {{"schema", "fixwal.mapping/1"}, {"intervals", arr}};
}

IntervalMapping mapping_from_json(const json& j) {
  IntervalMapping m;
  for (const auto& e : j.at("intervals")) {
    m.entries.push_back({e.at("wal_size").get<std::size_t>(),
                         Interval{e.at("lo").get<std::uint32_t>(), e.at("hi").get<std::uint32_t>()}});
  }
  return m;
}

void print_mapping(const IntervalMapping& m) {
  for (const auto& [size, iv] : m.entries) {
    std::cout << "  " << std::setw(8) << size << " -> (" << iv.lo << ", " << iv.hi << "]\n";
  }
}

int cmd_attack_train(const Options& o) {
  if (o.trace.empty()) throw UsageError("--trace is required");
  const auto data = load_lengths(o.trace);
  const auto mapping = train_mapping(data);
  const auto objective = mapping_objective(data, mapping);
  if (!o.model.empty()) {
    std::ofstream out(o.model);
    out << mapping_json(mapping).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kDurabilityError, "cannot write " + o.model);
  }
  if (machine(o)) {
    json j = mapping_json(mapping);
    j["objective"] = objective;
    j["training_items"] = data.size();
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "mapping (objective " << objective << " of " << data.size() << ")\n";
    print_mapping(mapping);
  }
  return kExitOk;
}

int cmd_attack_eval(const Options& o) {
  if (o.trace.empty()) throw UsageError("--trace is required");
  IntervalMapping mapping;
  if (!o.model.empty()) {
    std::ifstream in(o.model);
    if (!in) throw Error(ErrorCode::kNoData, "cannot open " + o.model);
    try {
      mapping = mapping_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kNoData, std::string("bad mapping file: ") + e.what());
    }
  } else {
    mapping = train_mapping(load_lengths(o.trace));
  }
  const auto test = load_lengths(o.test_trace.empty() ? o.trace : o.test_trace);
  const auto ev = evaluate_mapping(test, mapping);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  if (machine(o)) {
    json rows = json::array();
    for (const auto& s : ev.scores) {
      rows.push_back({{"wal_size", s.wal_size}, {"lo", s.interval.lo}, {"hi", s.interval.hi},
                      {"predictions", s.predictions}, {"correct", s.correct},
                      {"in_interval", s.in_interval}, {"precision", opt(s.precision)},
                      {"recall", opt(s.recall)}});
    }
    json j{{"schema", "fixwal.evaluation/1"}, {"scores", rows}, {"unmapped", ev.unmapped}};
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "wal_size  interval     precision  recall\n";
    for (const auto& s : ev.scores) {
      std::ostringstream iv;
      iv << '(' << s.interval.lo << ", " << s.interval.hi << ']';
      std::cout << std::left << std::setw(10) << s.wal_size << std::setw(13) << iv.str()
                << std::setw(11) << (s.precision ? fixed(*s.precision, 2) : "undef")
                << (s.recall ? fixed(*s.recall, 2) : "undef") << std::right << '\n';
    }
    if (ev.unmapped) std::cout << ev.unmapped << " test items had an unmapped WAL size\n";
  }
  return kExitOk;
}

int cmd_attack_schema(const Options& o) {
  if (o.trace.empty()) throw UsageError("--trace is required");
  std::ifstream in(o.trace);
  if (!in) throw Error(ErrorCode::kNoData, "cannot open " + o.trace);
  const auto map = reverse_size_map(read_schema_csv(in));
  if (machine(o)) {
    json sizes = json::array();
    for (const auto& [size, schemas] : map.schemas_by_size) sizes.push_back({{"wal_size", size}, {"schemas", schemas}});
    json hist = json::object();
    for (const auto& [n, count] : map.histogram) hist[std::to_string(n)] = count;
    json j{{"schema", "fixwal.reverse_map/1"}, {"sizes", sizes}, {"histogram", hist},
           {"identifiable", map.identifiable()}};
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "schemas per size -> number of sizes\n";
    for (const auto& [n, count] : map.histogram) std::cout << "  " << n << " -> " << count << '\n';
    std::cout << map.identifiable().size() << " schemas identified with certainty\n";
  }
  return kExitOk;
}

// ---- gen ----------------------------------------------------------------------

int cmd_gen(const Options& o) {
  if (o.what == "workload") {
    const auto spec = workload_from(o);
    std::cout << "op,payload_size,record_size\n";
    const auto sizes = generate_sizes(spec);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      std::cout << i << ',' << sizes[i] << ',' << encoded_record_size(sizes[i]) << '\n';
    }
  } else if (o.what == "lengths") {
    LengthTraceSpec spec;
    spec.count = o.count;
    spec.fixed_bytes = o.fixed_bytes;
    spec.noise_bytes = o.noise_bytes;
    spec.max_city_length = o.max_city;
    spec.segment_size = o.segment_size;
    spec.seed = o.seed;
    write_length_csv(std::cout, generate_length_trace(spec));
  } else if (o.what == "schemas") {
    write_schema_csv(std::cout, generate_schema_corpus(o.instances, o.seed));
  } else {
    throw UsageError("gen target must be workload, lengths or schemas");
  }
  return kExitOk;
}

// ---- demo ---------------------------------------------------------------------

int cmd_demo_quorum(const Options& o) {
  BenchConfig c;
  c.backend = BackendKind::kQuorum;
  c.segment_size = o.segment_size;
  c.max_write_size = o.max_write_size;
  c.slot_capacity = o.max_write_size;
  c.replicas = o.replicas;
  c.selection = selection_from(o.selection);
  c.seed = o.seed;
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  auto say = [](const std::string& line) { std::cout << "* " << line << '\n'; };

  BenchHarness h(c);
  auto& backend = dynamic_cast<QuorumBackend&>(h.backend());
  say(std::to_string(c.replicas) + " replicas registered; " +
      std::to_string(backend.groups().size()) + " quorum groups of 3 formed");
  say("selection " + selection_name(c.selection) + ", S=" + std::to_string(c.segment_size) +
      ", K=" + std::to_string(c.max_write_size / c.segment_size) + " segments per write at most");

  WorkloadSpec spec = workload_from(o);
  spec.op_count = std::min<std::size_t>(o.ops, 200);
  WorkloadGenerator gen(spec);
  std::vector<Bytes> committed;
  while (!gen.done()) {
    Bytes p = gen.next();
    p.resize(std::min(p.size(), c.slot_capacity - kRecordHeaderSize));
    h.engine().append(p, true);
    h.note_record(p.size());
    p.resize(round_up(p.size(), 4), 0);
    committed.push_back(std::move(p));
  }
  BenchReport r;
  h.account(r);
  say(std::to_string(committed.size()) + " full-sync writes committed; " +
      std::to_string(r.write_count) + " real segments of " +
      std::to_string(stored_unit_size(c.segment_size)) + " bytes each sent to 3 replicas");
  say("metadata writes all " + std::to_string(metadata_blob_size(c.max_write_size / c.segment_size)) +
      " bytes: " + std::to_string(r.write_sizes.size()) + " distinct size(s) on disk");

  h.crash();
  say("client crashed; one replica in every group killed");
  const auto records = h.recover();
  bool same = records.size() == committed.size();
  for (std::size_t i = 0; same && i < records.size(); ++i) same = records[i].payload == committed[i];
  say("recovery read one surviving replica per segment, verified SHA-256 digests: " +
      std::to_string(records.size()) + " records, " + (same ? "identical to" : "DIFFERENT from") +
      " what was committed");

  // Tamper with every surviving copy of one segment. Real segments are numbered
  // before fakes, so sn 0 is always real.
  std::size_t tampered = 0;
  SegmentId victim{};
  bool have_victim = false;
  for (const auto& rep : h.bus()->replicas()) {
    if (!rep->alive()) continue;
    for (const auto& sid : rep->segment_ids()) {
      if (!have_victim && sid.sn == 0) {
        victim = sid;
        have_victim = true;
      }
      if (sid == victim && rep->corrupt(sid)) ++tampered;
    }
  }
  try {
    h.recover();
    say("tampering with " + std::to_string(tampered) + " copies went unnoticed (unexpected)");
    return kExitOperational;
  } catch (const Error& e) {
    say("tampered with " + std::to_string(tampered) + " surviving copies of one segment; recovery refused: " +
        std::string(error_code_name(e.code())));
  }
  return same ? kExitOk : kExitOperational;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"fixwal: fixed-size write-ahead log engine, leakage toolkit and benchmarks"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file with defaults for the shared options");

  app.add_option("--segment", o.segment_size, "Segment size S in bytes")->capture_default_str();
  app.add_option("--slot", o.slot_capacity, "Slot capacity in bytes (default 131072, or MS for quorum)");
  app.add_option("--flush-ms", o.flush_interval_ms, "Periodic flush interval")->capture_default_str();
  app.add_option("--scheme", o.scheme, "Durability backend")
      ->check(CLI::IsMember({"journal", "quorum"}))->capture_default_str();
  app.add_option("--selection", o.selection, "Quorum selection")
      ->check(CLI::IsMember({"vnos", "fnos"}))->capture_default_str();
  app.add_option("--replicas", o.replicas, "Replicas in the quorum cluster")->capture_default_str();
  app.add_option("--max-write", o.max_write_size, "Maximum write size MS")->capture_default_str();
  app.add_option("--checkpoint-s", o.checkpoint_interval_s, "Checkpoint interval")->capture_default_str();
  app.add_option("--key-file", o.key_file, "Key store file (FIXWAL_KEY takes precedence)");
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--out", o.out, "Output format")
      ->check(CLI::IsMember({"human", "json", "csv", "tsv"}))->capture_default_str();

  auto add_workload = [&](CLI::App* sub) {
    sub->add_option("--dist", o.dist, "uniform | zipf:<alpha> | constant:<size>")->capture_default_str();
    sub->add_option("--ops", o.ops, "Number of writes")->capture_default_str();
  };
  auto add_device = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "Journal layout")
        ->check(CLI::IsMember({"segmented", "unpadded", "naive"}))->capture_default_str();
    sub->add_option("--device-write-us", o.dev_write_us, "Emulated per-write latency");
    sub->add_option("--device-read-us", o.dev_read_us, "Emulated per-read latency");
    sub->add_option("--device-bw", o.dev_bw, "Emulated bandwidth in bytes per microsecond");
    sub->add_flag("--device-sleep", o.dev_sleep, "Block for the emulated device time");
  };

  auto* bench = app.add_subcommand("bench", "Benchmark drivers")->require_subcommand(1);
  auto* seq = bench->add_subcommand("seq", "Sequential full-sync writes");
  add_workload(seq);
  add_device(seq);
  auto* conc = bench->add_subcommand("conc", "Concurrent writers with periodic flush");
  add_workload(conc);
  add_device(conc);
  conc->add_option("--workers", o.workers, "Comma-separated concurrency levels")->capture_default_str();
  conc->add_option("--think-us", o.think_us, "Pause between a worker's writes");
  conc->add_option("--duration-ms", o.duration_ms, "Run each level for this long instead of --ops");
  conc->add_flag("--no-periodic", o.no_periodic, "Disable the periodic flusher");
  auto* brec = bench->add_subcommand("recovery", "Crash between checkpoints and time recovery");
  add_workload(brec);
  add_device(brec);
  brec->add_option("--sizes-mb", o.sizes_mb, "Committed WAL sizes to test")->capture_default_str();
  auto* brc = bench->add_subcommand("rc", "Relative cost for a range of segment sizes");
  add_workload(brc);
  brc->add_option("--segments", o.segment_list, "Segment sizes")->capture_default_str();

  auto* write = app.add_subcommand("write", "Append a generated workload to a journal directory");
  add_workload(write);
  write->add_option("--dir", o.dir, "Journal directory")->required();
  write->add_option("--mode", o.mode, "Journal layout")
      ->check(CLI::IsMember({"segmented", "unpadded", "naive"}))->capture_default_str();
  write->add_option("--checkpoint-every", o.checkpoint_every, "Checkpoint after every N writes");

  auto* recover = app.add_subcommand("recover", "Recover a journal directory and print stats");
  recover->add_option("--dir", o.dir, "Journal directory")->required();
  recover->add_option("--mode", o.mode, "Journal layout")
      ->check(CLI::IsMember({"segmented", "unpadded", "naive"}))->capture_default_str();
  recover->add_option("--dump", o.dump, "Print the first N records");

  auto* leak = app.add_subcommand("leak", "Size-leakage analysis")->require_subcommand(1);
  auto* post = leak->add_subcommand("posterior", "Closed-form posterior");
  post->add_option("--scheme", o.selection, "vnos | fnos")
      ->check(CLI::IsMember({"vnos", "fnos"}))->required();
  post->add_option("--prior", o.prior, "Comma-separated prior")->required();
  post->add_option("--quorums", o.quorums, "Candidate quorums N (default K)");
  auto* sim = leak->add_subcommand("simulate", "Monte-Carlo posterior");
  sim->add_option("--scheme", o.selection, "vnos | fnos")
      ->check(CLI::IsMember({"vnos", "fnos"}))->capture_default_str();
  sim->add_option("--prior", o.prior, "Comma-separated prior")->required();
  sim->add_option("--quorums", o.quorums, "Candidate quorums N (default 10)");
  sim->add_option("--max-segments", o.max_segments, "Segments per write K (default: groups)");
  sim->add_option("--trials", o.trials, "Simulated writes")->capture_default_str();
  sim->add_flag("--serial", o.serial, "Use the serial reference kernel");

  auto* attack = app.add_subcommand("attack", "Size-inference attack")->require_subcommand(1);
  auto* train = attack->add_subcommand("train", "Fit the interval mapping");
  train->add_option("--trace", o.trace, "CSV wal_size,length")->required();
  train->add_option("--model", o.model, "Write the mapping here (JSON)");
  auto* eval = attack->add_subcommand("eval", "Precision and recall of a mapping");
  eval->add_option("--trace", o.trace, "Training CSV, or test CSV with --model")->required();
  eval->add_option("--test", o.test_trace, "Separate test CSV");
  eval->add_option("--model", o.model, "Mapping JSON from attack train");
  auto* schema = attack->add_subcommand("schema", "Reverse map from WAL size to schemas");
  schema->add_option("--trace", o.trace, "CSV wal_size,schema")->required();

  auto* gen = app.add_subcommand("gen", "Generate traces as CSV");
  gen->add_option("what", o.what, "workload | lengths | schemas")
      ->check(CLI::IsMember({"workload", "lengths", "schemas"}))->capture_default_str();
  add_workload(gen);
  gen->add_option("--count", o.count, "Observations (lengths)")->capture_default_str();
  gen->add_option("--fixed-bytes", o.fixed_bytes, "Fixed record bytes (lengths)")->capture_default_str();
  gen->add_option("--noise-bytes", o.noise_bytes, "Other variable bytes (lengths)")->capture_default_str();
  gen->add_option("--max-city", o.max_city, "Longest city name (lengths)")->capture_default_str();
  gen->add_option("--instances", o.instances, "Instances per schema (schemas)")->capture_default_str();

  auto* demo = app.add_subcommand("demo", "Scripted walkthroughs")->require_subcommand(1);
  auto* dq = demo->add_subcommand("quorum", "Replicated log with crash, recovery and tampering");
  add_workload(dq);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (seq->parsed()) return cmd_bench_seq(o);
    if (conc->parsed()) return cmd_bench_conc(o);
    if (brec->parsed()) return cmd_bench_recovery(o);
    if (brc->parsed()) return cmd_bench_rc(o);
    if (write->parsed()) return cmd_write(o);
    if (recover->parsed()) return cmd_recover(o);
    if (post->parsed()) return cmd_leak_posterior(o);
    if (sim->parsed()) return cmd_leak_simulate(o);
    if (train->parsed()) return cmd_attack_train(o);
    if (eval->parsed()) return cmd_attack_eval(o);
    if (schema->parsed()) return cmd_attack_schema(o);
    if (gen->parsed()) return cmd_gen(o);
    if (dq->parsed()) return cmd_demo_quorum(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOperational;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOperational;
  }
  return kExitUsage;
}
