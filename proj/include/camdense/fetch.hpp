#ifndef CAMDENSE_FETCH_HPP
#define CAMDENSE_FETCH_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace camdense {

/// Polls one camera feed and stores timestamped snapshots under
/// output_dir/camera_id/. The feed is any HTTP endpoint returning the
/// current frame (traffic-authority feeds typically refresh every couple of
/// minutes, hence the default interval).
struct FetchConfig {
  std::string url;            // full http URL of the snapshot endpoint
  std::string camera_id;
  std::string output_dir;
  double interval_s = 120.0;
  int max_frames = 1;         // snapshots to take in this invocation
  int max_retries = 3;        // extra attempts per snapshot
  double backoff_base_s = 1.0;  // first retry delay, doubled per retry
};

struct FetchStats {
  int stored = 0;    // snapshots written
  int skipped = 0;   // already present from an earlier run
  int retries = 0;   // retry attempts across all snapshots
  int failures = 0;  // snapshots given up on after retries
  std::vector<std::string> messages;
};

/// Injection points so tests can run without wall-clock time.
using SleepFn = std::function<void(double seconds)>;
using ClockFn = std::function<std::int64_t()>;  // UTC seconds

/// Takes max_frames snapshots, interval_s apart. Each snapshot is stored as
/// {camera_id}/{utc timestamp}.jpg and appended to {camera_id}/index.json,
/// which is rewritten after every frame so an interrupted run resumes where
/// it stopped; existing timestamps are never refetched. Failed snapshots
/// are retried with exponential backoff, then logged and skipped; the loop
/// always continues. Throws NetworkError only when every snapshot failed.
FetchStats fetch_feed(const FetchConfig& config, SleepFn sleep = {}, ClockFn clock = {});

/// Compact UTC timestamp, filesystem-safe (no colons): 20260823T145900Z.
std::string utc_iso_compact(std::int64_t utc_s);

}  // namespace camdense

#endif  // CAMDENSE_FETCH_HPP
