// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "fixwal/crypto.hpp"
#include "fixwal/leakage.hpp"

using namespace fixwal;

namespace {

ReplicaKey bench_key() {
  ReplicaKey k;
  k.key_id = "bench";
  k.material.fill(0x5C);
  return k;
}

// One slot's worth of segments: range(0) segments of range(1) bytes.
std::vector<Bytes> make_segments(std::size_t count, std::size_t size) {
  std::mt19937_64 rng(1);
  std::vector<Bytes> out(count, Bytes(size));
  for (auto& s : out) {
    for (auto& b : s) b = static_cast<std::uint8_t>(rng());
  }
  return out;
}

template <bool Parallel>
void BM_Encrypt(benchmark::State& state) {
  const auto key = bench_key();
  const auto segments = make_segments(state.range(0), state.range(1));
  for (auto _ : state) {
    auto units = Parallel ? encrypt_segments(key, segments) : encrypt_segments_serial(key, segments);
    benchmark::DoNotOptimize(units);
  }
  state.SetBytesProcessed(state.iterations() * state.range(0) * state.range(1));
}

template <bool Parallel>
void BM_Decrypt(benchmark::State& state) {
  const auto key = bench_key();
  const auto size = static_cast<std::size_t>(state.range(1));
  Bytes stream;
  for (const auto& u : encrypt_segments_serial(key, make_segments(state.range(0), size))) {
    stream.insert(stream.end(), u.begin(), u.end());
  }
  for (auto _ : state) {
    auto plain = Parallel ? decrypt_units(key, stream, size) : decrypt_units_serial(key, stream, size);
    benchmark::DoNotOptimize(plain);
  }
  state.SetBytesProcessed(state.iterations() * state.range(0) * state.range(1));
}

template <bool Parallel>
void BM_SimulatePosterior(benchmark::State& state) {
  const PriorDistribution prior({0.4, 0.3, 0.2, 0.1});
  const auto scheme = state.range(1) ? SelectionScheme::kFnos : SelectionScheme::kVnos;
  for (auto _ : state) {
    auto r = Parallel ? simulate_posterior(prior, scheme, 10, 4, state.range(0), 7)
                      : simulate_posterior_serial(prior, scheme, 10, 4, state.range(0), 7);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void crypto_args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"segments", "S"});
  for (long count : {8, 1024, 16384}) {
    for (long size : {128, 4096}) b->Args({count, size});
  }
}

void sim_args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"trials", "fnos"});
  for (long trials : {100000, 1000000}) {
    for (long fnos : {0, 1}) b->Args({trials, fnos});
  }
}

}  // namespace

BENCHMARK(BM_Encrypt<false>)->Name("encrypt/serial")->Apply(crypto_args);
BENCHMARK(BM_Encrypt<true>)->Name("encrypt/openmp")->Apply(crypto_args)->UseRealTime();
BENCHMARK(BM_Decrypt<false>)->Name("decrypt/serial")->Apply(crypto_args);
BENCHMARK(BM_Decrypt<true>)->Name("decrypt/openmp")->Apply(crypto_args)->UseRealTime();
BENCHMARK(BM_SimulatePosterior<false>)->Name("simulate/serial")->Apply(sim_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulatePosterior<true>)
    ->Name("simulate/openmp")
    ->Apply(sim_args)
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
