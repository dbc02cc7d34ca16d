#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace landcover {

/// One address row from the property export.
struct PropertyRecord {
  std::string record_id;
  std::string address_line;
  std::string city;
  std::string state;
  std::string postal_code;
  bool fetchable = true;  // false when address_line is empty

  /// "address, city, state postal" with empty parts dropped.
  std::string query_string() const;
};

/// Maps record fields onto CSV header names. record_id and address_line are
/// required; an empty name for the others means "not present in this export".
struct ColumnMap {
  std::string record_id = "record_id";
  std::string address_line = "address";
  std::string city = "city";
  std::string state = "state";
  std::string postal_code = "zip";
};

/// Throws LoadError if the file cannot be read and SchemaError if a mapped
/// column is missing or a record id repeats.
std::vector<PropertyRecord> load_property_records(const std::filesystem::path& csv_path, const ColumnMap& columns,
                                                  char delimiter = ',');

enum class FetchStatus { Retrieved, Failed };
enum class FailureReason { BadAddress, HttpError, DecodeError, RateLimitedExhausted };

std::string_view to_string(FetchStatus status);
std::string_view to_string(FailureReason reason);
FailureReason parse_failure_reason(std::string_view text);

struct FetchResult {
  std::string record_id;
  FetchStatus status = FetchStatus::Failed;
  std::optional<FailureReason> failure_reason;
  std::optional<std::string> tile_path;  // relative to the cache directory

  bool operator==(const FetchResult&) const = default;
};

inline constexpr int kTileSize = 640;

/// Static-map request parameters. The API key itself is never stored here;
/// only the name of the environment variable that holds it.
struct ServiceConfig {
  std::string base_url = "https://maps.googleapis.com/maps/api/staticmap";
  std::string api_key_env = "LANDCOVER_MAPS_API_KEY";
  int zoom = 18;
  int size = kTileSize;
  std::string maptype = "satellite";
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{30};
};

void to_json(nlohmann::json& j, const ServiceConfig& config);
void from_json(const nlohmann::json& j, ServiceConfig& config);

struct TileQuery {
  std::string center;
  int zoom = 18;
  int size = kTileSize;
  std::string maptype = "satellite";
};

struct ServiceResponse {
  int status = 0;  // HTTP status; 0 when the transport failed
  std::string body;
};

/// Seam between the fetcher and the network. Implementations must be safe
/// to call from several threads at once.
class MapService {
public:
  virtual ~MapService() = default;
  virtual ServiceResponse get(const TileQuery& query) = 0;
};

/// HTTP(S) GET against a static-map endpoint:
/// <base_url>?center=..&zoom=..&size=WxH&maptype=..&key=..
class HttpMapService : public MapService {
public:
  /// Reads the API key from the environment variable named in `config`;
  /// a missing variable sends no key parameter.
  explicit HttpMapService(ServiceConfig config);
  ServiceResponse get(const TileQuery& query) override;

  /// Request target (path + query) without the key, for logs.
  std::string describe(const TileQuery& query) const;

private:
  std::string target(const TileQuery& query, bool with_key) const;

  ServiceConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

/// Percent-encoding for query values and cache file names.
std::string url_encode(std::string_view text);

/// Spaces requests at least 1/rate seconds apart across all threads, so any
/// one-second window holds at most floor(rate) + 1 requests.
class RateLimiter {
public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// One PNG per record id under <root>/tiles/, plus <root>/ledger.json.
class TileCache {
public:
  explicit TileCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path ledger_path() const { return root_ / "ledger.json"; }
  /// Relative path (from root) of the tile for `record_id`.
  std::string relative_tile_path(std::string_view record_id) const;
  std::filesystem::path tile_path(std::string_view record_id) const;
  /// True when a tile exists and decodes to 640 x 640 x 3.
  bool has_valid_tile(std::string_view record_id) const;
  /// Decodes `encoded` and stores it. Returns false if it is not a valid
  /// 640 x 640 colour image.
  bool store(std::string_view record_id, std::span<const unsigned char> encoded) const;

private:
  std::filesystem::path root_;
};

/// Fetch options shared by all records of a campaign.
struct FetchOptions {
  ServiceConfig service;
  RateLimiter* limiter = nullptr;  // optional
};

/// Retrieves one tile, consulting the cache first. Never throws for
/// per-record failures; they come back as a failed FetchResult.
///   400/404 and empty addresses -> bad_address (no retry)
///   429 until attempts run out   -> rate_limited_exhausted
///   5xx/transport until out      -> http_error; other 4xx -> http_error
///   200 with an invalid image    -> decode_error
FetchResult fetch_tile(const PropertyRecord& record, MapService& service, const TileCache& cache,
                       const FetchOptions& options, int* requests_made = nullptr);

struct FetchLedger {
  std::vector<FetchResult> results;
  nlohmann::json campaign_config;
  std::size_t requests = 0;  // network requests made by the run that produced it; not persisted

  const FetchResult* find(std::string_view record_id) const;
};

void save_ledger(const FetchLedger& ledger, const std::filesystem::path& path);
FetchLedger load_ledger(const std::filesystem::path& path);

struct CampaignOptions {
  ServiceConfig service;
  std::size_t parallelism = 4;
  double rate_limit = 10.0;  // requests per second
};

/// Fetches every record with a bounded worker pool sharing one rate limiter.
/// Results keep input order. Cached tiles are not re-fetched, and records a
/// previous ledger in the cache marked bad_address are carried over without
/// a request. The ledger is written to cache.ledger_path().
FetchLedger run_fetch_campaign(std::span<const PropertyRecord> records, MapService& service, const TileCache& cache,
                               const CampaignOptions& options);

struct LedgerSummary {
  std::size_t total = 0;
  std::size_t retrieved = 0;
  std::size_t failed = 0;
  std::map<FailureReason, std::size_t> by_reason;

  bool operator==(const LedgerSummary&) const = default;
};

LedgerSummary ledger_summary(const FetchLedger& ledger);

}  // namespace landcover
