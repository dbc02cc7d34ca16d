#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "landcover/dataset.hpp"
#include "landcover/evaluation.hpp"
#include "landcover/predictions.hpp"
#include "landcover/tiles.hpp"

namespace httplib {
class Server;
}

namespace landcover::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(std::string_view tag = "landcover");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

/// Class names of the four-label synthetic corpus.
const std::vector<std::string>& synthetic_classes();

/// Colored geometric composite for a label vector over synthetic_classes():
/// trees = green disc, water = blue band, buildings = gray square,
/// pavement = dark diagonal stripe, on a tan noisy background.
cv::Mat synthetic_image(std::span<const std::uint8_t> labels, int size, std::mt19937_64& rng);

/// Writes `n` PNG images plus labels.csv into `dir`. Labels are drawn so
/// every class is present in some images and absent in others.
void write_synthetic_corpus(const std::filesystem::path& dir, std::size_t n, int size, std::uint64_t seed);

/// Same images, in memory.
Corpus synthetic_corpus(std::size_t n, int size, std::uint64_t seed);

/// Encoded 640x640 RGB PNG with a color derived from `seed`.
std::vector<unsigned char> tile_png(std::uint32_t seed, int size = kTileSize);

/// Address table with `n` rows: record_id, address, city, state, zip.
std::vector<PropertyRecord> synthetic_addresses(std::size_t n);
void write_addresses_csv(const std::filesystem::path& path, std::span<const PropertyRecord> records);

/// Index set {k : floor((k+1) r) > floor(k r)}, of size floor(n r).
std::set<std::size_t> spread_failures(std::size_t n, double rate);

/// In-process map service: answers 404 for the listed query strings and a
/// valid tile otherwise. Records request times.
class StubMapService : public MapService {
public:
  explicit StubMapService(std::set<std::string> failing = {});
  ServiceResponse get(const TileQuery& query) override;
  std::size_t requests() const;
  std::vector<std::chrono::steady_clock::time_point> request_times() const;
  std::multiset<std::string> centers() const;

private:
  std::set<std::string> failing_;
  std::vector<unsigned char> png_;
  mutable std::mutex mutex_;
  std::vector<std::chrono::steady_clock::time_point> times_;
  std::multiset<std::string> centers_;
};

/// Largest number of request times falling into any half-open window of
/// length `window`.
std::size_t max_in_window(std::vector<std::chrono::steady_clock::time_point> times,
                          std::chrono::steady_clock::duration window);

/// Static-map HTTP stub on 127.0.0.1. Centers containing "INVALID" get 404,
/// "FLAKY" get 503 once then succeed, "JUNK" get 200 with an undecodable body.
class TileServer {
public:
  TileServer();
  ~TileServer();
  std::string base_url() const;
  std::size_t requests() const { return requests_.load(); }
  std::string last_target() const;

private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::vector<unsigned char> png_;
  std::atomic<std::size_t> requests_{0};
  mutable std::mutex mutex_;
  std::string last_target_;
  std::set<std::string> flaky_seen_;
};

/// Writes a complete toy pipeline into `dir`: a synthetic corpus, an
/// address table (record 1 invalid at the service, record 2 without an
/// address) and config.json pointing the map service at `base_url`.
std::filesystem::path write_pipeline_fixture(const std::filesystem::path& dir, const std::string& base_url,
                                             std::size_t images, std::size_t addresses);

/// Random PredictionSet with N rows, L labels and probabilities on a 0.1 grid.
PredictionSet random_prediction_set(std::mt19937_64& rng, std::size_t n, std::size_t l);

/// Brute-force micro metrics (fractions, not percentages) by per-cell counting.
struct OracleScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
OracleScores oracle_scores(const PredictionSet& preds, double threshold);

/// Exhaustive pairwise AUC with 0.5 credit for ties.
double oracle_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Path of the built CLI binary.
std::filesystem::path cli_path();

/// Runs the CLI with `args`, stdout/stderr appended to `log`. Returns the exit code.
int run_cli(const std::string& args, const std::filesystem::path& log);

}  // namespace landcover::testing
