#include "camdense/fetch.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "camdense/errors.hpp"
#include "camdense/io.hpp"

// httplib drags in resolv.h, whose _res macro mangles Eigen's parameter
// names; keep it after every Eigen-including header.
#include <httplib.h>
#include <json.hpp>

namespace camdense {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /rest, at least "/"
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw InputError("url must start with http:// or https://");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

struct IndexEntry {
  std::int64_t ts_utc_s = 0;
  std::string file;
  std::int64_t bytes = 0;
};

std::vector<IndexEntry> load_index(const fs::path& path) {
  if (!fs::exists(path)) return {};
  const json j = json::parse(read_text_file(path.string()));
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kSchemaVersion) {
    throw ParseError(path.string() + ": unsupported schema_version");
  }
  std::vector<IndexEntry> entries;
  for (const json& e : j["frames"]) {
    IndexEntry entry;
    entry.ts_utc_s = e.at("ts_utc_s").get<std::int64_t>();
    entry.file = e.at("file").get<std::string>();
    entry.bytes = e.at("bytes").get<std::int64_t>();
    entries.push_back(entry);
  }
  return entries;
}

void save_index(const fs::path& path, const std::string& camera_id,
                const std::vector<IndexEntry>& entries) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["camera"] = camera_id;
  j["frames"] = json::array();
  for (const IndexEntry& e : entries) {
    json ej;
    ej["ts_utc_s"] = e.ts_utc_s;
    ej["file"] = e.file;
    ej["bytes"] = e.bytes;
    j["frames"].push_back(ej);
  }
  write_text_file(path.string(), j.dump(2) + "\n");
}

}  // namespace

std::string utc_iso_compact(std::int64_t utc_s) {
  const std::time_t t = static_cast<std::time_t>(utc_s);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

FetchStats fetch_feed(const FetchConfig& config, SleepFn sleep, ClockFn clock) {
  if (config.interval_s <= 0.0) throw InputError("interval_s must be positive");
  if (config.max_frames < 1) throw InputError("max_frames must be at least 1");
  if (config.camera_id.empty()) throw InputError("camera_id must not be empty");
  if (!sleep) {
    sleep = [](double seconds) {
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    };
  }
  if (!clock) {
    clock = [] {
      return static_cast<std::int64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                           std::chrono::system_clock::now().time_since_epoch())
                                           .count());
    };
  }

  const SplitUrl url = split_url(config.url);
  const fs::path camera_dir = fs::path(config.output_dir) / config.camera_id;
  fs::create_directories(camera_dir);
  const fs::path index_path = camera_dir / "index.json";

  std::vector<IndexEntry> entries = load_index(index_path);
  std::set<std::int64_t> known;
  for (const IndexEntry& e : entries) known.insert(e.ts_utc_s);

  FetchStats stats;
  httplib::Client client(url.base);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(30, 0);

  for (int frame = 0; frame < config.max_frames; ++frame) {
    if (frame > 0) sleep(config.interval_s);
    const std::int64_t ts = clock();
    const std::string stamp = utc_iso_compact(ts);
    if (known.count(ts)) {
      ++stats.skipped;
      stats.messages.push_back(stamp + " already stored, skipping");
      continue;
    }

    std::string body;
    bool got = false;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      if (attempt > 0) {
        ++stats.retries;
        const double delay = config.backoff_base_s * static_cast<double>(1 << (attempt - 1));
        stats.messages.push_back(stamp + " retry " + std::to_string(attempt) + " after " +
                                 std::to_string(delay) + "s");
        sleep(delay);
      }
      httplib::Result res = client.Get(url.path);
      if (res && res->status == 200) {
        body = res->body;
        got = true;
        break;
      }
      const std::string reason =
          res ? "http status " + std::to_string(res->status) : httplib::to_string(res.error());
      stats.messages.push_back(stamp + " fetch failed: " + reason);
    }
    if (!got) {
      ++stats.failures;
      stats.messages.push_back(stamp + " giving up after " + std::to_string(config.max_retries) +
                               " retries");
      continue;
    }

    const std::string filename = stamp + ".jpg";
    write_text_file((camera_dir / filename).string(), body);
    IndexEntry entry;
    entry.ts_utc_s = ts;
    entry.file = filename;
    entry.bytes = static_cast<std::int64_t>(body.size());
    entries.push_back(entry);
    known.insert(ts);
    save_index(index_path, config.camera_id, entries);
    ++stats.stored;
    stats.messages.push_back(stamp + " stored " + std::to_string(entry.bytes) + " bytes");
  }

  if (stats.stored == 0 && stats.failures > 0) {
    throw NetworkError("no snapshot could be fetched from " + config.url);
  }
  return stats;
}

}  // namespace camdense
