#include "support.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <sys/wait.h>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "landcover/csv.hpp"

namespace landcover::testing {

namespace fs = std::filesystem;

TempDir::TempDir(std::string_view tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          (std::string(tag) + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

const std::vector<std::string>& synthetic_classes() {
  static const std::vector<std::string> classes{"trees", "water", "buildings", "pavement"};
  return classes;
}

cv::Mat synthetic_image(std::span<const std::uint8_t> labels, int size, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> noise(-12, 12);
  cv::Mat img(size, size, CV_8UC3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int n = noise(rng);
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(cv::saturate_cast<uchar>(196 + n), cv::saturate_cast<uchar>(176 + n),
                                          cv::saturate_cast<uchar>(136 + n));
    }
  }
  auto at = [&](double lo, double hi) {
    return static_cast<int>(std::uniform_real_distribution<double>(lo, hi)(rng) * size);
  };
  // Colors are RGB: the pixel buffer is RGB throughout the library.
  if (labels[3]) {
    int offset = at(-0.3, 0.3);
    cv::line(img, {offset, 0}, {size + offset, size}, cv::Scalar(60, 60, 64), std::max(2, size / 8));
  }
  if (labels[1]) {
    int y = at(0.0, 0.7);
    cv::rectangle(img, cv::Rect(0, y, size, std::max(2, size / 5)), cv::Scalar(30, 70, 200), cv::FILLED);
  }
  if (labels[2]) {
    int side = std::max(3, at(0.2, 0.3));
    cv::rectangle(img, cv::Rect(at(0.0, 0.65), at(0.0, 0.65), side, side), cv::Scalar(200, 40, 40), cv::FILLED);
  }
  if (labels[0]) {
    cv::circle(img, {at(0.2, 0.8), at(0.2, 0.8)}, std::max(2, at(0.1, 0.18)), cv::Scalar(30, 140, 40), cv::FILLED);
  }
  return img;
}

namespace {

std::vector<std::vector<std::uint8_t>> synthetic_labels(std::size_t n, std::mt19937_64& rng) {
  const std::size_t l = synthetic_classes().size();
  std::vector<std::vector<std::uint8_t>> labels(n, std::vector<std::uint8_t>(l));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < l; ++c) labels[i][c] = static_cast<std::uint8_t>(rng() & 1u);
  }
  // Each class present and absent at least once.
  for (std::size_t c = 0; c < l && n >= 2; ++c) {
    labels[c % n][c] = 1;
    labels[(c + l) % n][c] = 0;
  }
  return labels;
}

std::string image_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%03zu", i);
  return buf;
}

}  // namespace

Corpus synthetic_corpus(std::size_t n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto labels = synthetic_labels(n, rng);
  Corpus corpus;
  corpus.vocab = LabelVocabulary(synthetic_classes());
  for (std::size_t i = 0; i < n; ++i) {
    corpus.images.push_back({image_id(i), synthetic_image(labels[i], size, rng), labels[i]});
  }
  return corpus;
}

void write_synthetic_corpus(const fs::path& dir, std::size_t n, int size, std::uint64_t seed) {
  fs::create_directories(dir / "images");
  auto corpus = synthetic_corpus(n, size, seed);
  std::ofstream labels(dir / "labels.csv");
  std::vector<std::string> header{"image_id"};
  header.insert(header.end(), synthetic_classes().begin(), synthetic_classes().end());
  csv::write_row(labels, header);
  for (const auto& img : corpus.images) {
    write_rgb(dir / "images" / (img.image_id + ".png"), img.pixels);
    std::vector<std::string> row{img.image_id};
    for (auto v : img.labels) row.push_back(v ? "1" : "0");
    csv::write_row(labels, row);
  }
}

std::vector<unsigned char> tile_png(std::uint32_t seed, int size) {
  cv::Mat img(size, size, CV_8UC3, cv::Scalar(seed * 37 % 256, seed * 91 % 256, seed * 17 % 256));
  cv::circle(img, {size / 2, size / 2}, size / 4, cv::Scalar(30, 140, 40), cv::FILLED);
  std::vector<unsigned char> out;
  cv::imencode(".png", img, out);
  return out;
}

std::vector<PropertyRecord> synthetic_addresses(std::size_t n) {
  std::vector<PropertyRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "P%05zu", i);
    out.push_back({id, std::to_string(100 + i) + " Main St", "Houston", "TX", std::to_string(77000 + i % 100), true});
  }
  return out;
}

void write_addresses_csv(const fs::path& path, std::span<const PropertyRecord> records) {
  std::ofstream out(path);
  csv::write_row(out, {"record_id", "address", "city", "state", "zip"});
  for (const auto& r : records) csv::write_row(out, {r.record_id, r.address_line, r.city, r.state, r.postal_code});
}

std::set<std::size_t> spread_failures(std::size_t n, double rate) {
  std::set<std::size_t> out;
  for (std::size_t k = 0; k < n; ++k) {
    if (std::floor(static_cast<double>(k + 1) * rate) > std::floor(static_cast<double>(k) * rate)) out.insert(k);
  }
  return out;
}

StubMapService::StubMapService(std::set<std::string> failing) : failing_(std::move(failing)), png_(tile_png(7)) {}

ServiceResponse StubMapService::get(const TileQuery& query) {
  {
    std::lock_guard lock(mutex_);
    times_.push_back(std::chrono::steady_clock::now());
    centers_.insert(query.center);
  }
  if (failing_.contains(query.center)) return {404, "not found"};
  return {200, std::string(png_.begin(), png_.end())};
}

std::size_t StubMapService::requests() const {
  std::lock_guard lock(mutex_);
  return times_.size();
}

std::vector<std::chrono::steady_clock::time_point> StubMapService::request_times() const {
  std::lock_guard lock(mutex_);
  return times_;
}

std::multiset<std::string> StubMapService::centers() const {
  std::lock_guard lock(mutex_);
  return centers_;
}

std::size_t max_in_window(std::vector<std::chrono::steady_clock::time_point> times,
                          std::chrono::steady_clock::duration window) {
  std::sort(times.begin(), times.end());
  std::size_t best = 0;
  for (std::size_t i = 0, j = 0; i < times.size(); ++i) {
    while (j < times.size() && times[j] - times[i] < window) ++j;
    best = std::max(best, j - i);
  }
  return best;
}

TileServer::TileServer() : server_(std::make_unique<httplib::Server>()), png_(tile_png(11)) {
  server_->Get("/staticmap", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    std::string center = req.get_param_value("center");
    {
      std::lock_guard lock(mutex_);
      last_target_ = req.target;
    }
    if (center.find("INVALID") != std::string::npos) {
      res.status = 404;
      res.set_content("no imagery", "text/plain");
      return;
    }
    if (center.find("FLAKY") != std::string::npos) {
      std::lock_guard lock(mutex_);
      if (flaky_seen_.insert(center).second) {
        res.status = 503;
        return;
      }
    }
    if (center.find("JUNK") != std::string::npos) {
      res.set_content("not an image", "image/png");
      return;
    }
    res.set_content(std::string(png_.begin(), png_.end()), "image/png");
  });
  port_ = server_->bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

TileServer::~TileServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string TileServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/staticmap"; }

std::string TileServer::last_target() const {
  std::lock_guard lock(mutex_);
  return last_target_;
}

fs::path write_pipeline_fixture(const fs::path& dir, const std::string& base_url, std::size_t images,
                                std::size_t addresses) {
  write_synthetic_corpus(dir / "corpus", images, 48, 17);
  auto records = synthetic_addresses(addresses);
  if (records.size() > 2) {
    records[1].address_line = "INVALID 0 Nowhere";
    records[2].address_line.clear();
  }
  write_addresses_csv(dir / "addresses.csv", records);
  nlohmann::json config{
      {"paths",
       {{"corpus_dir", "corpus/images"},
        {"labels", "corpus/labels.csv"},
        {"addresses", "addresses.csv"},
        {"cache_dir", "cache"},
        {"output_dir", "out"}}},
      {"service", {{"base_url", base_url}, {"initial_backoff_ms", 1}, {"timeout_s", 5}}},
      {"campaign", {{"parallelism", 2}, {"rate_limit", 200}}},
      {"split", {{"val_fraction", 0.25}, {"seed", 1}}},
      {"training", {{"profiles", {"tiny_cnn"}}, {"epochs", 3}, {"batch_size", 8}, {"input_size", 32}, {"seed", 1}}},
      {"evaluation", {{"table_format", "text"}}},
      {"profile", "tiny_cnn"}};
  std::ofstream(dir / "config.json") << config.dump(2) << '\n';
  return dir / "config.json";
}

PredictionSet random_prediction_set(std::mt19937_64& rng, std::size_t n, std::size_t l) {
  PredictionSet set;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < l; ++c) names.push_back("c" + std::to_string(c));
  set.vocab = LabelVocabulary(names);
  set.probabilities = ProbabilityMatrix(n, l);
  set.truth = LabelMatrix(n, l);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < l; ++c) {
      set.probabilities(r, c) = static_cast<double>(rng() % 11) / 10.0;
      set.truth(r, c) = static_cast<unsigned char>(rng() & 1u);
    }
  }
  return set;
}

OracleScores oracle_scores(const PredictionSet& preds, double threshold) {
  double tp = 0, fp = 0, fn = 0, exact = 0;
  const auto n = preds.probabilities.rows();
  const auto l = preds.probabilities.cols();
  for (std::size_t r = 0; r < n; ++r) {
    bool all = true;
    for (std::size_t c = 0; c < l; ++c) {
      bool p = preds.probabilities(r, c) >= threshold;
      bool t = preds.truth(r, c) != 0;
      if (p && t) ++tp;
      if (p && !t) ++fp;
      if (!p && t) ++fn;
      if (p != t) all = false;
    }
    if (all) ++exact;
  }
  OracleScores s;
  s.accuracy = n ? exact / static_cast<double>(n) : 0.0;
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  s.f1 = 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  return s;
}

double oracle_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  double credit = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j]) continue;
      pairs += 1;
      if (scores[i] > scores[j]) credit += 1;
      else if (scores[i] == scores[j]) credit += 0.5;
    }
  }
  return credit / pairs;
}

fs::path cli_path() { return LANDCOVER_CLI_PATH; }

int run_cli(const std::string& args, const fs::path& log) {
  std::string cmd = cli_path().string() + " " + args + " >> " + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace landcover::testing
