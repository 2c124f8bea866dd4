#include "fixwal/wal.hpp"

#include <string>

#include "fixwal/error.hpp"

namespace fixwal {

Slot::Slot(std::size_t capacity, std::uint32_t first_ssn)
    : capacity_(capacity), ssn_(first_ssn), created_at_(std::chrono::steady_clock::now()) {
  if (capacity_ == 0 || capacity_ % 4 != 0) {
    throw Error(ErrorCode::kInvalidConfig, "slot capacity must be a positive multiple of 4");
  }
  buffer_.reserve(capacity_);
}

std::size_t Slot::buffered() const {
  std::lock_guard lock(mu_);
  return buffer_.size();
}

std::uint32_t Slot::next_ssn() const {
  std::lock_guard lock(mu_);
  return ssn_;
}

std::chrono::steady_clock::time_point Slot::created_at() const {
  std::lock_guard lock(mu_);
  return created_at_;
}

Lsn Slot::next_lsn_locked(const DurabilityBackend& backend, std::size_t len) {
  const Lsn pos = backend.position();
  if (pos.file_id != lsn_file_) {
    lsn_file_ = pos.file_id;
    lsn_offset_ = 0;
  }
  Lsn lsn{lsn_file_, lsn_offset_};
  lsn_offset_ += len;
  return lsn;
}

AppendResult Slot::append(ByteView record, bool full_sync, DurabilityBackend& backend) {
  if (record.size() < kRecordHeaderSize || get_u32(record.data()) != record.size() ||
      !plausible_length(static_cast<std::uint32_t>(record.size()))) {
    throw Error(ErrorCode::kMalformedHeader, "slot append of a record with an invalid header");
  }
  std::lock_guard lock(mu_);
  AppendResult result;
  if (buffer_.size() + record.size() > capacity_ && !buffer_.empty()) {
    flush_locked(backend);
    result.flushed = true;
  }
  if (record.size() > capacity_) {
    // Oversize records get a flush of their own.
    result.lsn = next_lsn_locked(backend, record.size());
    backend.persist(record, ssn_);
    ++ssn_;
    created_at_ = std::chrono::steady_clock::now();
    result.flushed = true;
    return result;
  }
  result.lsn = next_lsn_locked(backend, record.size());
  append_bytes(buffer_, record);
  if (full_sync) {
    try {
      flush_locked(backend);
    } catch (...) {
      buffer_.resize(buffer_.size() - record.size());
      lsn_offset_ -= record.size();
      throw;
    }
    result.flushed = true;
  }
  return result;
}

FlushReceipt Slot::flush(DurabilityBackend& backend) {
  std::lock_guard lock(mu_);
  return flush_locked(backend);
}

FlushReceipt Slot::flush_locked(DurabilityBackend& backend) {
  if (buffer_.empty()) return {ssn_, 0};
  backend.persist(buffer_, ssn_);
  FlushReceipt receipt{ssn_, buffer_.size()};
  buffer_.clear();
  ++ssn_;
  created_at_ = std::chrono::steady_clock::now();
  return receipt;
}

WalEngine::WalEngine(DurabilityBackend& backend, EngineOptions options)
    : backend_(backend), options_(options), slot_(options.slot_capacity) {
  if (options_.periodic_flush) start_periodic_flush();
}

WalEngine::~WalEngine() { stop_periodic_flush(); }

void WalEngine::rethrow_background_error() {
  std::lock_guard lock(flusher_mu_);
  if (background_error_) {
    auto err = background_error_;
    background_error_ = nullptr;
    std::rethrow_exception(err);
  }
}

AppendResult WalEngine::append(ByteView payload, bool full_sync) {
  rethrow_background_error();
  Bytes record = encode_record(payload);
  return slot_.append(record, full_sync, backend_);
}

FlushReceipt WalEngine::flush() {
  rethrow_background_error();
  return slot_.flush(backend_);
}

CheckpointMarker WalEngine::checkpoint() {
  std::lock_guard lock(checkpoint_mu_);
  // Drain earlier records so the checkpoint record starts a stored unit.
  slot_.flush(backend_);
  CheckpointMarker marker;
  marker.ckpt_id = backend_.next_checkpoint_id();
  Bytes id(8);
  put_u64(id.data(), marker.ckpt_id);
  marker.lsn = backend_.position();
  slot_.append(encode_record(id, record_flags::kCheckpoint), true, backend_);
  backend_.commit_checkpoint(marker);
  return marker;
}

void WalEngine::start_periodic_flush() {
  std::lock_guard lock(flusher_mu_);
  if (flusher_.joinable()) return;
  stop_flusher_ = false;
  flusher_ = std::thread([this] {
    std::unique_lock lk(flusher_mu_);
    while (!stop_flusher_) {
      flusher_cv_.wait_for(lk, options_.flush_policy.interval);
      if (stop_flusher_) break;
      lk.unlock();
      std::exception_ptr err;
      try {
        slot_.flush(backend_);
      } catch (...) {
        err = std::current_exception();
      }
      lk.lock();
      if (err && !background_error_) background_error_ = err;
    }
  });
}

void WalEngine::stop_periodic_flush() {
  {
    std::lock_guard lock(flusher_mu_);
    stop_flusher_ = true;
  }
  flusher_cv_.notify_all();
  if (flusher_.joinable()) flusher_.join();
}

}  // namespace fixwal
