#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace {

struct Run {
  int exit_code = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" FIXWAL_CLI_PATH "' " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const std::string kKeyEnv =
    "FIXWAL_KEY=0101010101010101010101010101010101010101010101010101010101010101";

struct TempDir {
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("fixwal-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
  std::filesystem::path path;
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("closed-form posteriors") {
  auto r = run("leak posterior --scheme fnos --prior 0.9,0.1");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("0.9000,0.1000") != std::string::npos);
  r = run("leak posterior --scheme vnos --prior 0.5,0.5");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("0.3333,0.6667") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("--no-such-flag").exit_code == 2);
  CHECK(run("leak posterior --scheme vnos --prior 0.5,0.4").exit_code == 2);
  CHECK(run("bench seq --dist zipf:-1").exit_code == 2);
  CHECK(run("--segment 100 bench seq --ops 1").exit_code == 2);
}

TEST_CASE("operational errors exit 1") {
  TempDir dir;
  const auto r = run("attack train --trace " + dir.str() + "/missing.csv --model " + dir.str() +
                     "/m.csv");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("NoData") != std::string::npos);
}

TEST_CASE("bench seq reports exact byte counts") {
  const auto r = run("--segment 128 --out json bench seq --dist constant:80 --ops 200");
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.output);
  // Ten attributes of 80 bytes encode to 816-byte records: seven units each.
  CHECK(j.at("ops") == 200);
  CHECK(j.at("write_count") == 1400);
  CHECK(j.at("bytes_written_actual") == 200 * 7 * 144);
  CHECK(j.at("bytes_written_padded") == 200 * 7 * 128);
  CHECK(j.at("bytes_written_baseline") == 200 * 816);
}

TEST_CASE("write then recover a journal directory") {
  TempDir dir;
  auto w = run("write --dir " + dir.str() + " --ops 40 --dist constant:20 --checkpoint-every 15",
               kKeyEnv);
  REQUIRE(w.exit_code == 0);
  auto r = run("--out json recover --dir " + dir.str(), kKeyEnv);
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.output);
  CHECK(j.at("records").get<int>() - j.at("checkpoint_records").get<int>() == 10);
  CHECK(j.at("checkpoint_records") == 1);

  const std::string wrong =
      "FIXWAL_KEY=0202020202020202020202020202020202020202020202020202020202020202";
  CHECK(run("recover --dir " + dir.str(), wrong).exit_code == 1);
}

TEST_CASE("key file is created and reused") {
  TempDir dir;
  const std::string keys = dir.str() + "/keys";
  const std::string journal = dir.str() + "/j";
  REQUIRE(run("--key-file " + keys + " write --dir " + journal + " --ops 5", "env -u FIXWAL_KEY")
              .exit_code == 0);
  CHECK(std::filesystem::exists(keys));
  const auto r = run("--key-file " + keys + " recover --dir " + journal, "env -u FIXWAL_KEY");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("records          5") != std::string::npos);
}

TEST_CASE("attack pipeline over generated traces") {
  TempDir dir;
  const std::string train = dir.str() + "/train.csv";
  const std::string test = dir.str() + "/test.csv";
  const std::string model = dir.str() + "/model.csv";
  REQUIRE(run("--seed 1 --out csv gen lengths --count 800 --noise-bytes 0 > " + train).exit_code ==
          0);
  REQUIRE(run("--seed 2 --out csv gen lengths --count 400 --noise-bytes 0 > " + test).exit_code ==
          0);
  REQUIRE(run("attack train --trace " + train + " --model " + model).exit_code == 0);
  const auto r = run("--out json attack eval --trace " + train + " --test " + test + " --model " +
                     model);
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.output);
  for (const auto& s : j.at("scores")) {
    if (!s.at("precision").is_null()) CHECK(s.at("precision") == 1.0);
  }
}

TEST_CASE("quorum demo runs") {
  for (const char* selection : {"vnos", "fnos"}) {
    CAPTURE(selection);
    const auto r = run(std::string("--selection ") + selection + " demo quorum");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("IntegrityFailure") != std::string::npos);
  }
}
