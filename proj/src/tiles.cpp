#include "landcover/tiles.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <opencv2/imgcodecs.hpp>

#include "landcover/csv.hpp"
#include "landcover/dataset.hpp"
#include "landcover/error.hpp"

namespace landcover {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Property records

std::string PropertyRecord::query_string() const {
  std::string out = address_line;
  auto append = [&](const std::string& part, const char* sep) {
    if (part.empty()) return;
    if (!out.empty()) out += sep;
    out += part;
  };
  append(city, ", ");
  append(state, ", ");
  append(postal_code, " ");
  return out;
}

namespace {

std::string trimmed(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::vector<PropertyRecord> load_property_records(const fs::path& csv_path, const ColumnMap& columns,
                                                  char delimiter) {
  csv::Table table = csv::read_file(csv_path, delimiter);

  auto require = [&](const std::string& name, const char* field) {
    int idx = table.column(name);
    if (idx < 0) {
      throw SchemaError("address file " + csv_path.string() + ": column '" + name + "' (mapped to " + field +
                        ") not found");
    }
    return idx;
  };
  auto optional = [&](const std::string& name, const char* field) { return name.empty() ? -1 : require(name, field); };

  const int id_col = require(columns.record_id, "record_id");
  const int addr_col = require(columns.address_line, "address_line");
  const int city_col = optional(columns.city, "city");
  const int state_col = optional(columns.state, "state");
  const int zip_col = optional(columns.postal_code, "postal_code");

  std::vector<PropertyRecord> records;
  records.reserve(table.rows.size());
  std::unordered_set<std::string> ids;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto cell = [&](int col) { return col >= 0 && static_cast<std::size_t>(col) < row.size() ? trimmed(row[col]) : std::string{}; };
    PropertyRecord rec{cell(id_col), cell(addr_col), cell(city_col), cell(state_col), cell(zip_col), true};
    if (rec.record_id.empty()) throw SchemaError("address file row " + std::to_string(r + 2) + ": empty record id");
    if (!ids.insert(rec.record_id).second) {
      throw SchemaError("address file row " + std::to_string(r + 2) + ": duplicate record id '" + rec.record_id + "'");
    }
    rec.fetchable = !rec.address_line.empty();
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Enums and JSON

std::string_view to_string(FetchStatus status) {
  return status == FetchStatus::Retrieved ? "retrieved" : "failed";
}

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::BadAddress: return "bad_address";
    case FailureReason::HttpError: return "http_error";
    case FailureReason::DecodeError: return "decode_error";
    case FailureReason::RateLimitedExhausted: return "rate_limited_exhausted";
  }
  return "unknown";
}

FailureReason parse_failure_reason(std::string_view text) {
  for (auto r : {FailureReason::BadAddress, FailureReason::HttpError, FailureReason::DecodeError,
                 FailureReason::RateLimitedExhausted}) {
    if (to_string(r) == text) return r;
  }
  throw SchemaError("unknown failure reason '" + std::string(text) + "'");
}

void to_json(nlohmann::json& j, const ServiceConfig& c) {
  j = nlohmann::json{{"base_url", c.base_url},
                     {"api_key_env", c.api_key_env},
                     {"zoom", c.zoom},
                     {"size", c.size},
                     {"maptype", c.maptype},
                     {"max_attempts", c.max_attempts},
                     {"initial_backoff_ms", c.initial_backoff.count()},
                     {"timeout_s", c.timeout.count()}};
}

void from_json(const nlohmann::json& j, ServiceConfig& c) {
  c.base_url = j.value("base_url", c.base_url);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.zoom = j.value("zoom", c.zoom);
  c.size = j.value("size", c.size);
  c.maptype = j.value("maptype", c.maptype);
  c.max_attempts = j.value("max_attempts", c.max_attempts);
  c.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", c.initial_backoff.count()));
  c.timeout = std::chrono::seconds(j.value("timeout_s", c.timeout.count()));
  if (c.max_attempts < 1) throw ConfigError("service.max_attempts must be >= 1");
  if (c.size != kTileSize) throw ConfigError("service.size must be 640");
}

// ---------------------------------------------------------------------------
// HTTP service

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

HttpMapService::HttpMapService(ServiceConfig config) : config_(std::move(config)) {
  auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("service.base_url needs a scheme: " + config_.base_url);
  auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.base_url.substr(path_start);
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpMapService::target(const TileQuery& q, bool with_key) const {
  std::string t = path_;
  t += path_.find('?') == std::string::npos ? '?' : '&';
  t += "center=" + url_encode(q.center);
  t += "&zoom=" + std::to_string(q.zoom);
  t += "&size=" + std::to_string(q.size) + "x" + std::to_string(q.size);
  t += "&maptype=" + url_encode(q.maptype);
  if (with_key && !api_key_.empty()) t += "&key=" + url_encode(api_key_);
  return t;
}

std::string HttpMapService::describe(const TileQuery& q) const { return target(q, false); }

ServiceResponse HttpMapService::get(const TileQuery& query) {
  // httplib::Client is not safe for concurrent use; one per request.
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_follow_location(true);
  auto res = client.Get(target(query, true));
  if (!res) return {0, {}};
  return {res->status, std::move(res->body)};
}

// ---------------------------------------------------------------------------
// Rate limiting

RateLimiter::RateLimiter(double requests_per_second) {
  if (!(requests_per_second > 0.0)) throw ArgumentError("rate limit must be positive");
  interval_ = std::chrono::ceil<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / requests_per_second));
}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

// ---------------------------------------------------------------------------
// Cache

TileCache::TileCache(fs::path root) : root_(std::move(root)) { fs::create_directories(root_ / "tiles"); }

std::string TileCache::relative_tile_path(std::string_view record_id) const {
  return "tiles/" + url_encode(record_id) + ".png";
}

fs::path TileCache::tile_path(std::string_view record_id) const { return root_ / relative_tile_path(record_id); }

namespace {

bool is_valid_tile(const cv::Mat& rgb) {
  return !rgb.empty() && rgb.rows == kTileSize && rgb.cols == kTileSize && rgb.type() == CV_8UC3;
}

}  // namespace

bool TileCache::has_valid_tile(std::string_view record_id) const {
  auto path = tile_path(record_id);
  if (!fs::is_regular_file(path)) return false;
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  return !img.empty() && img.rows == kTileSize && img.cols == kTileSize && img.channels() == 3 &&
         img.depth() == CV_8U;
}

bool TileCache::store(std::string_view record_id, std::span<const unsigned char> encoded) const {
  cv::Mat rgb = decode_rgb(encoded);
  if (!is_valid_tile(rgb)) return false;
  auto final_path = tile_path(record_id);
  auto tmp = root_ / ("tiles/" + url_encode(record_id) + ".partial-" +
                      std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".png");
  write_rgb(tmp, rgb);
  fs::rename(tmp, final_path);
  return true;
}

// ---------------------------------------------------------------------------
// Fetching

FetchResult fetch_tile(const PropertyRecord& record, MapService& service, const TileCache& cache,
                       const FetchOptions& options, int* requests_made) {
  int requests = 0;
  auto done = [&](FetchResult r) {
    if (requests_made) *requests_made = requests;
    return r;
  };
  auto failed = [&](FailureReason reason) {
    return done({record.record_id, FetchStatus::Failed, reason, std::nullopt});
  };

  if (cache.has_valid_tile(record.record_id)) {
    return done({record.record_id, FetchStatus::Retrieved, std::nullopt, cache.relative_tile_path(record.record_id)});
  }
  if (!record.fetchable || record.address_line.empty()) return failed(FailureReason::BadAddress);

  TileQuery query{record.query_string(), options.service.zoom, options.service.size, options.service.maptype};
  FailureReason last = FailureReason::HttpError;
  auto backoff = options.service.initial_backoff;
  for (int attempt = 1; attempt <= options.service.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    if (options.limiter) options.limiter->acquire();
    ServiceResponse response;
    try {
      ++requests;
      response = service.get(query);
    } catch (const std::exception& e) {
      response = {0, {}};
    }

    if (response.status == 200) {
      auto bytes = std::span(reinterpret_cast<const unsigned char*>(response.body.data()), response.body.size());
      bool stored = false;
      try {
        stored = cache.store(record.record_id, bytes);
      } catch (const std::exception&) {
        stored = false;
      }
      if (!stored) return failed(FailureReason::DecodeError);
      return done({record.record_id, FetchStatus::Retrieved, std::nullopt, cache.relative_tile_path(record.record_id)});
    }
    if (response.status == 400 || response.status == 404) return failed(FailureReason::BadAddress);
    if (response.status == 429) {
      last = FailureReason::RateLimitedExhausted;
      continue;
    }
    if (response.status == 0 || response.status >= 500) {
      last = FailureReason::HttpError;
      continue;
    }
    // Remaining statuses (auth failures, other 4xx) will not improve on retry.
    return failed(FailureReason::HttpError);
  }
  return failed(last);
}

const FetchResult* FetchLedger::find(std::string_view record_id) const {
  auto it = std::find_if(results.begin(), results.end(), [&](const FetchResult& r) { return r.record_id == record_id; });
  return it == results.end() ? nullptr : &*it;
}

void save_ledger(const FetchLedger& ledger, const fs::path& path) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& r : ledger.results) {
    nlohmann::json item{{"record_id", r.record_id}, {"status", to_string(r.status)}};
    item["failure_reason"] = r.failure_reason ? nlohmann::json(to_string(*r.failure_reason)) : nlohmann::json(nullptr);
    item["tile_path"] = r.tile_path ? nlohmann::json(*r.tile_path) : nlohmann::json(nullptr);
    results.push_back(std::move(item));
  }
  nlohmann::json doc{{"campaign_config", ledger.campaign_config}, {"results", std::move(results)}};
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw LoadError("cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

FetchLedger load_ledger(const fs::path& path) {
  FetchLedger ledger;
  try {
    auto doc = nlohmann::json::parse(csv::read_text(path));
    ledger.campaign_config = doc.value("campaign_config", nlohmann::json::object());
    for (const auto& item : doc.at("results")) {
      FetchResult r;
      r.record_id = item.at("record_id").get<std::string>();
      auto status = item.at("status").get<std::string>();
      if (status == "retrieved") r.status = FetchStatus::Retrieved;
      else if (status == "failed") r.status = FetchStatus::Failed;
      else throw SchemaError("ledger " + path.string() + ": unknown status '" + status + "'");
      if (item.contains("failure_reason") && !item["failure_reason"].is_null()) {
        r.failure_reason = parse_failure_reason(item["failure_reason"].get<std::string>());
      }
      if (item.contains("tile_path") && !item["tile_path"].is_null()) r.tile_path = item["tile_path"].get<std::string>();
      bool consistent = (r.status == FetchStatus::Retrieved) == r.tile_path.has_value() &&
                        (r.status == FetchStatus::Failed) == r.failure_reason.has_value();
      if (!consistent) throw SchemaError("ledger " + path.string() + ": inconsistent entry for '" + r.record_id + "'");
      ledger.results.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("ledger " + path.string() + ": " + e.what());
  }
  return ledger;
}

FetchLedger run_fetch_campaign(std::span<const PropertyRecord> records, MapService& service, const TileCache& cache,
                               const CampaignOptions& options) {
  if (options.parallelism < 1) throw ArgumentError("fetch campaign: parallelism must be >= 1");
  if (!(options.rate_limit > 0.0)) throw ArgumentError("fetch campaign: rate_limit must be positive");

  // Terminal failures from an earlier run are not worth another request.
  std::unordered_set<std::string> known_bad;
  if (fs::exists(cache.ledger_path())) {
    for (const auto& r : load_ledger(cache.ledger_path()).results) {
      if (r.failure_reason == FailureReason::BadAddress) known_bad.insert(r.record_id);
    }
  }

  RateLimiter limiter(options.rate_limit);
  FetchOptions fetch_options{options.service, &limiter};

  FetchLedger ledger;
  ledger.results.resize(records.size());
  ledger.campaign_config = {{"service", options.service},
                            {"parallelism", options.parallelism},
                            {"rate_limit", options.rate_limit}};

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> requests{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      const auto& record = records[i];
      if (known_bad.contains(record.record_id) && !cache.has_valid_tile(record.record_id)) {
        ledger.results[i] = {record.record_id, FetchStatus::Failed, FailureReason::BadAddress, std::nullopt};
        continue;
      }
      int made = 0;
      ledger.results[i] = fetch_tile(record, service, cache, fetch_options, &made);
      requests += static_cast<std::size_t>(made);
    }
  };

  {
    std::vector<std::jthread> pool;
    std::size_t n_workers = std::min(options.parallelism, std::max<std::size_t>(records.size(), 1));
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  ledger.requests = requests.load();
  save_ledger(ledger, cache.ledger_path());
  return ledger;
}

LedgerSummary ledger_summary(const FetchLedger& ledger) {
  LedgerSummary s;
  s.total = ledger.results.size();
  for (const auto& r : ledger.results) {
    if (r.status == FetchStatus::Retrieved) {
      ++s.retrieved;
    } else {
      ++s.failed;
      if (r.failure_reason) ++s.by_reason[*r.failure_reason];
    }
  }
  return s;
}

}  // namespace landcover
