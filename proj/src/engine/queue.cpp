#include "gradeforge/engine/queue.hpp"

#include <iostream>

#include "gradeforge/error.hpp"
#include "gradeforge/util/hash.hpp"

namespace gradeforge::engine {

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "failed";
}

nlohmann::json to_json(const GradingJob& job) {
  nlohmann::json j = {{"job_id", job.job_id},
                      {"submission_ref", job.submission_ref},
                      {"state", std::string(to_string(job.state))}};
  if (job.language_hint) j["language_hint"] = *job.language_hint;
  j["report"] = job.report ? core::to_json(*job.report) : nlohmann::json(nullptr);
  if (job.state == JobState::failed) j["error"] = job.error;
  return j;
}

GradingQueue::GradingQueue(Grader& grader, Options options) : grader_(grader) {
  unsigned n = options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());
  max_pending_ = options.max_pending ? options.max_pending : 10 * static_cast<std::size_t>(n);
  threads_.reserve(n);
  for (unsigned i = 0; i < n; ++i) threads_.emplace_back([this] { worker_loop(); });
}

GradingQueue::~GradingQueue() { shutdown(); }

void GradingQueue::set_listener(Listener listener) {
  std::lock_guard lock(mutex_);
  listener_ = std::move(listener);
}

void GradingQueue::shutdown() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_ && threads_.empty()) return;
    stopping_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
  done_cv_.notify_all();
}

std::string GradingQueue::enqueue(JobSpec spec) {
  if (!spec.suite) throw Error(ErrorKind::internal, "grading job without a suite");
  GradingJob snapshot;
  {
    std::lock_guard lock(mutex_);
    if (stopping_) throw Error(ErrorKind::queue_full, "grading queue is shutting down");
    if (!spec.over_capacity && queued_count_ >= max_pending_) {
      throw Error(ErrorKind::queue_full,
                  "grading queue full (" + std::to_string(queued_count_) + " pending)");
    }
    std::string id = spec.job_id.value_or(util::random_id());
    if (jobs_.count(id)) throw Error(ErrorKind::conflict, "job " + id + " already exists", "job_id");
    Entry e;
    e.job.job_id = id;
    e.job.submission_ref = spec.submission_ref;
    e.job.language_hint = spec.language_hint;
    e.spec = std::move(spec);
    snapshot = e.job;
    jobs_.emplace(id, std::move(e));
    ++queued_count_;
  }
  // Observers see "queued" before any worker can report "running".
  publish(snapshot);
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(snapshot.job_id);
  }
  work_cv_.notify_one();
  return snapshot.job_id;
}

GradingJob GradingQueue::job_status(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorKind::not_found, "unknown job " + job_id, "job_id");
  return it->second.job;
}

bool GradingQueue::contains(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  return jobs_.count(job_id) > 0;
}

std::optional<GradingJob> GradingQueue::wait(const std::string& job_id,
                                             std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  auto finished = [&] {
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw Error(ErrorKind::not_found, "unknown job " + job_id, "job_id");
    auto s = it->second.job.state;
    return s == JobState::done || s == JobState::failed;
  };
  if (!done_cv_.wait_for(lock, timeout, finished)) return std::nullopt;
  return jobs_.at(job_id).job;
}

std::size_t GradingQueue::pending() const {
  std::lock_guard lock(mutex_);
  return queued_count_;
}

void GradingQueue::publish(const GradingJob& snapshot) {
  Listener l;
  {
    std::lock_guard lock(mutex_);
    l = listener_;
  }
  if (l) l(snapshot);
}

void GradingQueue::worker_loop() {
  for (;;) {
    JobSpec spec;
    GradingJob snapshot;
    {
      std::unique_lock lock(mutex_);
      work_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      std::string id = queue_.front();
      queue_.pop_front();
      --queued_count_;
      Entry& e = jobs_.at(id);
      e.job.state = JobState::running;
      spec = std::move(e.spec);
      snapshot = e.job;
    }
    publish(snapshot);

    std::optional<core::GradeReport> report;
    std::string error;
    try {
      report = grader_.grade_submission(spec.files, *spec.suite, spec.language_hint);
    } catch (const std::exception& ex) {
      error = ex.what();
    }
    if (report) {
      snapshot.report = std::move(report);
      snapshot.state = JobState::done;
    } else {
      snapshot.error = error;
      snapshot.state = JobState::failed;
    }
    try {
      publish(snapshot);
    } catch (const std::exception& ex) {
      std::cerr << "gradeforge: job listener failed for " << snapshot.job_id << ": " << ex.what()
                << "\n";
    }
    {
      std::lock_guard lock(mutex_);
      jobs_.at(snapshot.job_id).job = snapshot;
    }
    done_cv_.notify_all();
  }
}

}  // namespace gradeforge::engine
