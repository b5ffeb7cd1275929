#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gradeforge/core/report.hpp"
#include "gradeforge/core/test_suite.hpp"
#include "gradeforge/engine/grader.hpp"
#include "gradeforge/util/files.hpp"

namespace gradeforge::engine {

enum class JobState { queued, running, done, failed };

std::string_view to_string(JobState s);

struct JobSpec {
  std::string submission_ref;
  util::FileMap files;
  std::shared_ptr<const core::TestSuite> suite;
  std::optional<std::string> language_hint;
  // Reuse a known id (recovery after restart); a fresh one otherwise.
  std::optional<std::string> job_id;
  // Skip the max_pending check, for work that is already persisted.
  bool over_capacity = false;
};

// Snapshot of a job. state == done exactly when report is present.
struct GradingJob {
  std::string job_id;
  std::string submission_ref;
  std::optional<std::string> language_hint;
  JobState state = JobState::queued;
  std::optional<core::GradeReport> report;
  std::string error;  // set when failed
};

nlohmann::json to_json(const GradingJob& job);

// FIFO queue drained by a fixed pool of worker threads.
class GradingQueue {
 public:
  using Listener = std::function<void(const GradingJob&)>;

  struct Options {
    unsigned workers = 0;        // 0 = hardware concurrency
    std::size_t max_pending = 0;  // 0 = 10 x workers
  };

  GradingQueue(Grader& grader, Options options);
  ~GradingQueue();
  GradingQueue(const GradingQueue&) = delete;
  GradingQueue& operator=(const GradingQueue&) = delete;

  // Called on every state transition from the thread making it, outside the
  // queue lock. For done/failed it runs before job_status can observe the new
  // state, so a listener that persists reports is never behind a poller. Set
  // before the first enqueue.
  void set_listener(Listener listener);

  // Throws Error(queue_full) when max_pending jobs are already waiting, and
  // Error(conflict) when job_id is already known.
  std::string enqueue(JobSpec spec);
  // Throws Error(not_found).
  GradingJob job_status(const std::string& job_id) const;
  bool contains(const std::string& job_id) const;

  // Blocks until the job is done or failed, or the timeout passes.
  std::optional<GradingJob> wait(const std::string& job_id, std::chrono::milliseconds timeout);

  std::size_t pending() const;
  unsigned workers() const { return static_cast<unsigned>(threads_.size()); }
  std::size_t max_pending() const { return max_pending_; }

  // Stops accepting work, lets running jobs finish, drops queued ones.
  void shutdown();

 private:
  struct Entry {
    GradingJob job;
    JobSpec spec;
  };

  void worker_loop();
  void publish(const GradingJob& snapshot);

  Grader& grader_;
  std::size_t max_pending_;
  mutable std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  std::deque<std::string> queue_;
  std::size_t queued_count_ = 0;
  std::map<std::string, Entry> jobs_;
  bool stopping_ = false;
  Listener listener_;
  std::vector<std::thread> threads_;
};

}  // namespace gradeforge::engine
