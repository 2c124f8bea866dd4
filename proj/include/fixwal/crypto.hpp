#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>

#include "fixwal/bytes.hpp"

namespace fixwal {

inline constexpr std::size_t kIvSize = 16;
inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kDigestSize = 32;

using SegmentDigest = std::array<std::uint8_t, kDigestSize>;

// AES-256 key. Never serialized into any journal, metadata or replica store.
struct ReplicaKey {
  std::string key_id;
  std::array<std::uint8_t, kKeySize> material{};
};

// Stored unit layout: [iv:16][ciphertext:S]. Size is S + 16 for every input.
using StoredUnit = Bytes;

inline std::size_t stored_unit_size(std::size_t segment_size) { return segment_size + kIvSize; }

// AES-256-CBC with a fresh random IV and no cipher padding; plaintext length
// must be a multiple of 16.
StoredUnit encrypt_segment(const ReplicaKey& key, ByteView plaintext);

// A wrong key yields garbage, not an error: integrity is checked with digests.
Bytes decrypt_segment(const ReplicaKey& key, ByteView unit);

SegmentDigest digest_segment(ByteView plaintext);

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

void random_bytes(std::span<std::uint8_t> out);

// Data-parallel batch kernels. The serial variants are the reference the
// parallel ones are tested against.
std::vector<StoredUnit> encrypt_segments_serial(const ReplicaKey& key,
                                                const std::vector<Bytes>& segments);
std::vector<StoredUnit> encrypt_segments(const ReplicaKey& key, const std::vector<Bytes>& segments);
Bytes decrypt_units_serial(const ReplicaKey& key, ByteView units, std::size_t segment_size);
Bytes decrypt_units(const ReplicaKey& key, ByteView units, std::size_t segment_size);

class KeyProvider {
 public:
  virtual ~KeyProvider() = default;
  // Throws KeyNotFound for an unknown id.
  virtual ReplicaKey get(const std::string& key_id) = 0;
};

class InMemoryKeyProvider : public KeyProvider {
 public:
  void put(const ReplicaKey& key);
  ReplicaKey generate(const std::string& key_id);
  ReplicaKey get(const std::string& key_id) override;

 private:
  std::mutex mu_;
  std::map<std::string, ReplicaKey> keys_;
};

// Stands in for an external key-management appliance: keys live in a store
// file kept apart from every directory the engine writes to.
class FileKeyProvider : public KeyProvider {
 public:
  explicit FileKeyProvider(std::filesystem::path store);

  ReplicaKey get_or_create(const std::string& key_id);
  ReplicaKey get(const std::string& key_id) override;

 private:
  void load();
  void save() const;

  std::filesystem::path store_;
  std::mutex mu_;
  std::map<std::string, ReplicaKey> keys_;
};

// Single key supplied as 64 hex characters in an environment variable.
class EnvKeyProvider : public KeyProvider {
 public:
  explicit EnvKeyProvider(std::string variable = "FIXWAL_KEY", std::string key_id = "env");
  ReplicaKey get(const std::string& key_id) override;

 private:
  std::string variable_;
  std::string key_id_;
};

}  // namespace fixwal
