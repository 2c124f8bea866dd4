#include "fixwal/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <algorithm>
#include <thread>

#include "fixwal/error.hpp"

namespace fixwal {
namespace {

[[noreturn]] void io_error(const std::string& what) {
  throw Error(ErrorCode::kDurabilityError, what + ": " + std::strerror(errno));
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

// ---- MemoryStorage ----------------------------------------------------------

void MemoryStorage::append(const std::string& name, ByteView data) {
  std::lock_guard lock(mu_);
  append_bytes(files_[name].data, data);
}

void MemoryStorage::sync(const std::string& name) {
  std::lock_guard lock(mu_);
  auto& f = files_[name];
  f.synced = f.data.size();
}

void MemoryStorage::write_atomic(const std::string& name, ByteView data) {
  std::lock_guard lock(mu_);
  auto& f = files_[name];
  f.data.assign(data.begin(), data.end());
  f.synced = f.data.size();
}

Bytes MemoryStorage::read(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = files_.find(name);
  if (it == files_.end()) throw Error(ErrorCode::kNotFound, "file " + name);
  return it->second.data;
}

std::optional<std::uint64_t> MemoryStorage::size(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = files_.find(name);
  if (it == files_.end()) return std::nullopt;
  return it->second.data.size();
}

std::vector<std::string> MemoryStorage::list() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, _] : files_) out.push_back(name);
  return out;
}

bool MemoryStorage::remove(const std::string& name) {
  std::lock_guard lock(mu_);
  return files_.erase(name) > 0;
}

void MemoryStorage::truncate(const std::string& name, std::uint64_t size) {
  std::lock_guard lock(mu_);
  auto& f = files_[name];
  f.data.resize(std::min<std::size_t>(f.data.size(), size));
  f.synced = std::min(f.synced, f.data.size());
}

void MemoryStorage::crash() {
  std::lock_guard lock(mu_);
  for (auto& [_, f] : files_) f.data.resize(f.synced);
}

// ---- DirectoryStorage -------------------------------------------------------

DirectoryStorage::DirectoryStorage(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

DirectoryStorage::~DirectoryStorage() {
  for (auto& [_, fd] : fds_) ::close(fd);
}

int DirectoryStorage::fd_for(const std::string& name) {
  auto it = fds_.find(name);
  if (it != fds_.end()) return it->second;
  int fd = ::open((dir_ / name).c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
  if (fd < 0) io_error("open " + name);
  fds_[name] = fd;
  return fd;
}

void DirectoryStorage::close_fd(const std::string& name) {
  auto it = fds_.find(name);
  if (it == fds_.end()) return;
  ::close(it->second);
  fds_.erase(it);
}

void DirectoryStorage::append(const std::string& name, ByteView data) {
  std::lock_guard lock(mu_);
  int fd = fd_for(name);
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_error("write " + name);
    }
    done += static_cast<std::size_t>(n);
  }
}

void DirectoryStorage::sync(const std::string& name) {
  std::lock_guard lock(mu_);
  if (::fdatasync(fd_for(name)) != 0) io_error("fdatasync " + name);
}

void DirectoryStorage::write_atomic(const std::string& name, ByteView data) {
  std::lock_guard lock(mu_);
  close_fd(name);
  const auto tmp = dir_ / (name + ".tmp");
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) io_error("open " + tmp.string());
  bool ok = ::write(fd, data.data(), data.size()) == static_cast<ssize_t>(data.size()) &&
            ::fdatasync(fd) == 0;
  ::close(fd);
  if (!ok) io_error("write " + tmp.string());
  if (::rename(tmp.c_str(), (dir_ / name).c_str()) != 0) io_error("rename " + name);
  int dfd = ::open(dir_.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

Bytes DirectoryStorage::read(const std::string& name) const {
  std::ifstream in(dir_ / name, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "file " + name);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

std::optional<std::uint64_t> DirectoryStorage::size(const std::string& name) const {
  std::error_code ec;
  auto n = std::filesystem::file_size(dir_ / name, ec);
  if (ec) return std::nullopt;
  return n;
}

std::vector<std::string> DirectoryStorage::list() const {
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file()) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool DirectoryStorage::remove(const std::string& name) {
  std::lock_guard lock(mu_);
  close_fd(name);
  std::error_code ec;
  return std::filesystem::remove(dir_ / name, ec);
}

void DirectoryStorage::truncate(const std::string& name, std::uint64_t size) {
  std::lock_guard lock(mu_);
  close_fd(name);
  std::error_code ec;
  std::filesystem::resize_file(dir_ / name, size, ec);
  if (ec) throw Error(ErrorCode::kDurabilityError, "truncate " + name + ": " + ec.message());
}

// ---- ObservedStorage --------------------------------------------------------

ObservedStorage::ObservedStorage(Storage& inner, DeviceModel model)
    : inner_(inner), model_(model) {}

void ObservedStorage::charge(double latency_us, std::size_t bytes, bool wait) const {
  if (!model_.enabled()) return;
  double us = latency_us;
  if (model_.bytes_per_us > 0) us += static_cast<double>(bytes) / model_.bytes_per_us;
  const auto ns = std::chrono::nanoseconds(static_cast<std::int64_t>(us * 1000.0));
  device_ns_ += static_cast<std::uint64_t>(ns.count());
  if (!model_.sleep) return;
  std::lock_guard device(device_mu_);
  const auto now = std::chrono::steady_clock::now();
  free_at_ = std::max(free_at_, now) + ns;
  // Short operations queue up and are paid for at the next sync or once the
  // backlog grows past a millisecond; sleep granularity is too coarse otherwise.
  if (wait || free_at_ - now > std::chrono::milliseconds(1)) {
    std::this_thread::sleep_until(free_at_);
  }
}

void ObservedStorage::drain() const {
  if (!model_.sleep) return;
  std::lock_guard device(device_mu_);
  std::this_thread::sleep_until(free_at_);
}

void ObservedStorage::check_fault() {
  std::lock_guard lock(mu_);
  if (fail_after_ < 0) return;
  if (fail_after_ == 0) throw Error(ErrorCode::kDurabilityError, "injected write failure");
  --fail_after_;
}

void ObservedStorage::append(const std::string& name, ByteView data) {
  check_fault();
  charge(model_.write_latency_us, data.size(), false);
  inner_.append(name, data);
  std::lock_guard lock(mu_);
  if (trace_enabled_) trace_.push_back({name, data.size()});
  ++histograms_[name][data.size()];
}

void ObservedStorage::sync(const std::string& name) {
  drain();
  inner_.sync(name);
}

void ObservedStorage::write_atomic(const std::string& name, ByteView data) {
  check_fault();
  charge(model_.write_latency_us, data.size(), true);
  inner_.write_atomic(name, data);
  std::lock_guard lock(mu_);
  if (trace_enabled_) trace_.push_back({name, data.size()});
  ++histograms_[name][data.size()];
}

Bytes ObservedStorage::read(const std::string& name) const {
  Bytes out = inner_.read(name);
  charge(model_.read_latency_us, out.size(), true);
  return out;
}

std::optional<std::uint64_t> ObservedStorage::size(const std::string& name) const {
  return inner_.size(name);
}

std::vector<std::string> ObservedStorage::list() const { return inner_.list(); }

bool ObservedStorage::remove(const std::string& name) { return inner_.remove(name); }

void ObservedStorage::truncate(const std::string& name, std::uint64_t size) {
  inner_.truncate(name, size);
}

std::vector<WriteEvent> ObservedStorage::trace() const {
  std::lock_guard lock(mu_);
  return trace_;
}

std::vector<std::size_t> ObservedStorage::write_sizes(const std::string& prefix) const {
  std::lock_guard lock(mu_);
  std::vector<std::size_t> out;
  for (const auto& e : trace_) {
    if (starts_with(e.name, prefix)) out.push_back(e.size);
  }
  return out;
}

std::map<std::size_t, std::uint64_t> ObservedStorage::size_histogram(
    const std::string& prefix) const {
  std::lock_guard lock(mu_);
  std::map<std::size_t, std::uint64_t> out;
  for (const auto& [name, hist] : histograms_) {
    if (!starts_with(name, prefix)) continue;
    for (const auto& [size, count] : hist) out[size] += count;
  }
  return out;
}

std::uint64_t ObservedStorage::bytes_written(const std::string& prefix) const {
  std::uint64_t total = 0;
  for (const auto& [size, count] : size_histogram(prefix)) total += size * count;
  return total;
}

std::uint64_t ObservedStorage::write_count(const std::string& prefix) const {
  std::uint64_t total = 0;
  for (const auto& [_, count] : size_histogram(prefix)) total += count;
  return total;
}

void ObservedStorage::clear_trace() {
  std::lock_guard lock(mu_);
  trace_.clear();
  histograms_.clear();
}

void ObservedStorage::set_trace_enabled(bool enabled) {
  std::lock_guard lock(mu_);
  trace_enabled_ = enabled;
}

void ObservedStorage::fail_after(long count) {
  std::lock_guard lock(mu_);
  fail_after_ = count;
}

}  // namespace fixwal
