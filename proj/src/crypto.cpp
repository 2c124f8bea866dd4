#include "fixwal/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "fixwal/error.hpp"

namespace fixwal {
namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

void run_cbc(const ReplicaKey& key, const std::uint8_t* iv, ByteView in, std::uint8_t* out,
             bool encrypt) {
  if (in.size() % 16 != 0) {
    throw Error(ErrorCode::kInvalidSegmentSize, "cipher input is not a multiple of 16 bytes");
  }
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx ||
      EVP_CipherInit_ex(ctx.get(), EVP_aes_256_cbc(), nullptr, key.material.data(), iv,
                        encrypt ? 1 : 0) != 1) {
    throw Error(ErrorCode::kDurabilityError, "cipher initialisation failed");
  }
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  int produced = 0;
  int tail = 0;
  if (EVP_CipherUpdate(ctx.get(), out, &produced, in.data(), static_cast<int>(in.size())) != 1 ||
      EVP_CipherFinal_ex(ctx.get(), out + produced, &tail) != 1 ||
      static_cast<std::size_t>(produced + tail) != in.size()) {
    throw Error(ErrorCode::kDurabilityError, "cipher operation failed");
  }
}

}  // namespace

void random_bytes(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw Error(ErrorCode::kDurabilityError, "random source failed");
  }
}

StoredUnit encrypt_segment(const ReplicaKey& key, ByteView plaintext) {
  StoredUnit unit(kIvSize + plaintext.size());
  random_bytes(std::span(unit.data(), kIvSize));
  run_cbc(key, unit.data(), plaintext, unit.data() + kIvSize, true);
  return unit;
}

Bytes decrypt_segment(const ReplicaKey& key, ByteView unit) {
  if (unit.size() < kIvSize) {
    throw Error(ErrorCode::kIntegrityFailure, "stored unit shorter than its IV");
  }
  Bytes plain(unit.size() - kIvSize);
  run_cbc(key, unit.data(), unit.subspan(kIvSize), plain.data(), false);
  return plain;
}

SegmentDigest digest_segment(ByteView plaintext) {
  SegmentDigest d{};
  unsigned int len = 0;
  if (EVP_Digest(plaintext.data(), plaintext.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != kDigestSize) {
    throw Error(ErrorCode::kIntegrityFailure, "sha-256 failed");
  }
  return d;
}

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw Error(ErrorCode::kInvalidConfig, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::kInvalidConfig, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

std::vector<StoredUnit> encrypt_segments_serial(const ReplicaKey& key,
                                                const std::vector<Bytes>& segments) {
  std::vector<StoredUnit> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) out.push_back(encrypt_segment(key, seg));
  return out;
}

std::vector<StoredUnit> encrypt_segments(const ReplicaKey& key, const std::vector<Bytes>& segments) {
  std::vector<StoredUnit> out(segments.size());
  const auto n = static_cast<std::ptrdiff_t>(segments.size());
  // Exceptions cannot cross the parallel region; record the first failure.
  bool failed = false;
#pragma omp parallel for schedule(static) if (n > 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = encrypt_segment(key, segments[i]);
    } catch (...) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) throw Error(ErrorCode::kDurabilityError, "segment encryption failed");
  return out;
}

Bytes decrypt_units_serial(const ReplicaKey& key, ByteView units, std::size_t segment_size) {
  const std::size_t unit = stored_unit_size(segment_size);
  const std::size_t n = units.size() / unit;
  Bytes out(n * segment_size);
  for (std::size_t i = 0; i < n; ++i) {
    ByteView u = units.subspan(i * unit, unit);
    run_cbc(key, u.data(), u.subspan(kIvSize), out.data() + i * segment_size, false);
  }
  return out;
}

Bytes decrypt_units(const ReplicaKey& key, ByteView units, std::size_t segment_size) {
  const std::size_t unit = stored_unit_size(segment_size);
  const auto n = static_cast<std::ptrdiff_t>(units.size() / unit);
  Bytes out(static_cast<std::size_t>(n) * segment_size);
  bool failed = false;
#pragma omp parallel for schedule(static) if (n > 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      ByteView u = units.subspan(static_cast<std::size_t>(i) * unit, unit);
      run_cbc(key, u.data(), u.subspan(kIvSize), out.data() + i * segment_size, false);
    } catch (...) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) throw Error(ErrorCode::kDurabilityError, "unit decryption failed");
  return out;
}

void InMemoryKeyProvider::put(const ReplicaKey& key) {
  std::lock_guard lock(mu_);
  keys_[key.key_id] = key;
}

ReplicaKey InMemoryKeyProvider::generate(const std::string& key_id) {
  std::lock_guard lock(mu_);
  auto it = keys_.find(key_id);
  if (it != keys_.end()) return it->second;
  ReplicaKey key{key_id, {}};
  random_bytes(key.material);
  keys_[key_id] = key;
  return key;
}

ReplicaKey InMemoryKeyProvider::get(const std::string& key_id) {
  std::lock_guard lock(mu_);
  auto it = keys_.find(key_id);
  if (it == keys_.end()) throw Error(ErrorCode::kKeyNotFound, "key '" + key_id + "'");
  return it->second;
}

FileKeyProvider::FileKeyProvider(std::filesystem::path store) : store_(std::move(store)) { load(); }

void FileKeyProvider::load() {
  std::ifstream in(store_);
  std::string id, hex;
  while (in >> id >> hex) {
    Bytes material = from_hex(hex);
    if (material.size() != kKeySize) {
      throw Error(ErrorCode::kInvalidConfig, "key '" + id + "' has the wrong length");
    }
    ReplicaKey key{id, {}};
    std::copy(material.begin(), material.end(), key.material.begin());
    keys_[id] = key;
  }
}

void FileKeyProvider::save() const {
  auto tmp = store_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [id, key] : keys_) out << id << ' ' << to_hex(key.material) << '\n';
    if (!out) throw Error(ErrorCode::kDurabilityError, "cannot write key store");
  }
  std::filesystem::rename(tmp, store_);
}

ReplicaKey FileKeyProvider::get_or_create(const std::string& key_id) {
  std::lock_guard lock(mu_);
  auto it = keys_.find(key_id);
  if (it != keys_.end()) return it->second;
  ReplicaKey key{key_id, {}};
  random_bytes(key.material);
  keys_[key_id] = key;
  save();
  return key;
}

ReplicaKey FileKeyProvider::get(const std::string& key_id) {
  std::lock_guard lock(mu_);
  auto it = keys_.find(key_id);
  if (it == keys_.end()) throw Error(ErrorCode::kKeyNotFound, "key '" + key_id + "'");
  return it->second;
}

EnvKeyProvider::EnvKeyProvider(std::string variable, std::string key_id)
    : variable_(std::move(variable)), key_id_(std::move(key_id)) {}

ReplicaKey EnvKeyProvider::get(const std::string& key_id) {
  const char* value = std::getenv(variable_.c_str());
  if (key_id != key_id_ || value == nullptr) {
    throw Error(ErrorCode::kKeyNotFound, "key '" + key_id + "' via $" + variable_);
  }
  Bytes material = from_hex(value);
  if (material.size() != kKeySize) {
    throw Error(ErrorCode::kInvalidConfig, "$" + variable_ + " must hold 64 hex digits");
  }
  ReplicaKey key{key_id, {}};
  std::copy(material.begin(), material.end(), key.material.begin());
  return key;
}

}  // namespace fixwal
