#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fixwal/bytes.hpp"

namespace fixwal {

// Flat namespace of append-only files. Implementations are thread-safe.
class Storage {
 public:
  virtual ~Storage() = default;

  virtual void append(const std::string& name, ByteView data) = 0;
  virtual void sync(const std::string& name) = 0;
  // Replaces the file's content through a temporary and a rename.
  virtual void write_atomic(const std::string& name, ByteView data) = 0;
  virtual Bytes read(const std::string& name) const = 0;
  virtual std::optional<std::uint64_t> size(const std::string& name) const = 0;
  virtual std::vector<std::string> list() const = 0;
  virtual bool remove(const std::string& name) = 0;
  virtual void truncate(const std::string& name, std::uint64_t size) = 0;

  bool exists(const std::string& name) const { return size(name).has_value(); }
};

class MemoryStorage : public Storage {
 public:
  void append(const std::string& name, ByteView data) override;
  void sync(const std::string& name) override;
  void write_atomic(const std::string& name, ByteView data) override;
  Bytes read(const std::string& name) const override;
  std::optional<std::uint64_t> size(const std::string& name) const override;
  std::vector<std::string> list() const override;
  bool remove(const std::string& name) override;
  void truncate(const std::string& name, std::uint64_t size) override;

  // Loses everything appended since each file's last sync.
  void crash();

 private:
  struct File {
    Bytes data;
    std::size_t synced = 0;
  };
  mutable std::mutex mu_;
  std::map<std::string, File> files_;
};

class DirectoryStorage : public Storage {
 public:
  explicit DirectoryStorage(std::filesystem::path dir);
  ~DirectoryStorage() override;

  void append(const std::string& name, ByteView data) override;
  void sync(const std::string& name) override;
  void write_atomic(const std::string& name, ByteView data) override;
  Bytes read(const std::string& name) const override;
  std::optional<std::uint64_t> size(const std::string& name) const override;
  std::vector<std::string> list() const override;
  bool remove(const std::string& name) override;
  void truncate(const std::string& name, std::uint64_t size) override;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  int fd_for(const std::string& name);
  void close_fd(const std::string& name);

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, int> fds_;
};

// Cost model for an emulated block device. Each operation costs a fixed
// latency plus its size over the bandwidth. With `sleep` set the device is a
// single queue in wall-clock time: writes are queued, sync and read wait
// until the queue has drained.
struct DeviceModel {
  double write_latency_us = 0;
  double read_latency_us = 0;
  double bytes_per_us = 0;  // 0 = infinite bandwidth
  bool sleep = false;

  bool enabled() const { return write_latency_us > 0 || read_latency_us > 0 || bytes_per_us > 0; }
};

struct WriteEvent {
  std::string name;
  std::size_t size = 0;
};

// Instrumented pass-through shim: records every write and its size, applies
// an optional device model, and can inject write failures.
class ObservedStorage : public Storage {
 public:
  explicit ObservedStorage(Storage& inner, DeviceModel model = {});

  void append(const std::string& name, ByteView data) override;
  void sync(const std::string& name) override;
  void write_atomic(const std::string& name, ByteView data) override;
  Bytes read(const std::string& name) const override;
  std::optional<std::uint64_t> size(const std::string& name) const override;
  std::vector<std::string> list() const override;
  bool remove(const std::string& name) override;
  void truncate(const std::string& name, std::uint64_t size) override;

  std::vector<WriteEvent> trace() const;
  // Sizes of writes to files whose name starts with `prefix`.
  std::vector<std::size_t> write_sizes(const std::string& prefix = "") const;
  std::uint64_t bytes_written(const std::string& prefix = "") const;
  std::uint64_t write_count(const std::string& prefix = "") const;
  // Write-size histogram, maintained even when the trace is disabled.
  std::map<std::size_t, std::uint64_t> size_histogram(const std::string& prefix = "") const;
  void clear_trace();
  // Set to keep only sizes; bounded memory for long runs.
  void set_trace_enabled(bool enabled);

  // The next `count` successful writes go through, then every write fails
  // with DurabilityError until cleared (negative clears).
  void fail_after(long count);

  std::chrono::nanoseconds device_time() const {
    return std::chrono::nanoseconds(device_ns_.load());
  }
  void reset_device_time() { device_ns_ = 0; }
  const DeviceModel& model() const { return model_; }
  // Not synchronized with in-flight operations.
  void set_model(const DeviceModel& model) { model_ = model; }

 private:
  void charge(double latency_us, std::size_t bytes, bool wait) const;
  void drain() const;
  void check_fault();

  Storage& inner_;
  DeviceModel model_;
  mutable std::mutex device_mu_;
  mutable std::atomic<std::uint64_t> device_ns_{0};
  mutable std::chrono::steady_clock::time_point free_at_{};
  mutable std::mutex mu_;
  std::vector<WriteEvent> trace_;
  std::map<std::string, std::map<std::size_t, std::uint64_t>> histograms_;
  bool trace_enabled_ = true;
  long fail_after_ = -1;
};

}  // namespace fixwal
