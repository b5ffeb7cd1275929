#include "gradeforge/engine/queue.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "gradeforge/error.hpp"

namespace gradeforge::engine {
namespace {

using namespace std::chrono_literals;

sandbox::Sandbox& shared_sandbox() {
  static sandbox::Sandbox sb;
  return sb;
}

std::shared_ptr<const core::TestSuite> suite_of(std::string run, std::optional<std::string> out) {
  core::TestCase t;
  t.name = "t";
  t.run_command = std::move(run);
  t.expected_output = std::move(out);
  t.points = 1;
  return std::make_shared<const core::TestSuite>(std::vector<core::TestCase>{t});
}

JobSpec job(util::FileMap files, std::shared_ptr<const core::TestSuite> suite) {
  JobSpec s;
  s.submission_ref = "sub";
  s.files = std::move(files);
  s.suite = std::move(suite);
  return s;
}

TEST(Queue, EnqueueThenPollUntilDone) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 2});
  auto id = q.enqueue(job({}, suite_of("echo hi", "hi")));
  auto st = q.job_status(id);
  EXPECT_TRUE(st.state == JobState::queued || st.state == JobState::running ||
              st.state == JobState::done);
  auto done = q.wait(id, 30s);
  ASSERT_TRUE(done);
  EXPECT_EQ(done->state, JobState::done);
  ASSERT_TRUE(done->report);
  EXPECT_TRUE(done->report->all_passed);
}

TEST(Queue, UnknownJobIsNotFound) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 1});
  try {
    q.job_status("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_found);
  }
}

TEST(Queue, HundredJobsAllComplete) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 4, .max_pending = 200});
  std::atomic<int> completed{0};
  q.set_listener([&](const GradingJob& j) {
    if (j.state == JobState::done) ++completed;
  });
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) {
    std::string token = "tok" + std::to_string(i);
    ids.push_back(q.enqueue(job({{"f.txt", token}}, suite_of("cat f.txt", token))));
  }
  int passed = 0;
  for (const auto& id : ids) {
    auto r = q.wait(id, 120s);
    ASSERT_TRUE(r);
    passed += r->report && r->report->all_passed;
  }
  EXPECT_EQ(passed, 100);
  EXPECT_EQ(completed.load(), 100);
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 100u);
}

TEST(Queue, StateSequencesAreMonotone) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 3, .max_pending = 100});
  std::mutex m;
  std::map<std::string, std::vector<JobState>> seen;
  q.set_listener([&](const GradingJob& j) {
    std::lock_guard lock(m);
    seen[j.job_id].push_back(j.state);
  });
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back(q.enqueue(job({}, suite_of("true", std::nullopt))));
  for (const auto& id : ids) ASSERT_TRUE(q.wait(id, 60s));
  std::lock_guard lock(m);
  for (const auto& id : ids) {
    EXPECT_EQ(seen[id], (std::vector<JobState>{JobState::queued, JobState::running,
                                               JobState::done}));
  }
}

TEST(Queue, FifoWithSingleWorker) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 1, .max_pending = 50});
  std::mutex m;
  std::vector<std::string> started;
  q.set_listener([&](const GradingJob& j) {
    std::lock_guard lock(m);
    if (j.state == JobState::running) started.push_back(j.job_id);
  });
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(q.enqueue(job({}, suite_of("true", std::nullopt))));
  for (const auto& id : ids) ASSERT_TRUE(q.wait(id, 60s));
  std::lock_guard lock(m);
  EXPECT_EQ(started, ids);
}

TEST(Queue, FullQueueRejects) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 1, .max_pending = 2});
  std::vector<std::string> ids;
  int rejected = 0;
  for (int i = 0; i < 6; ++i) {
    try {
      ids.push_back(q.enqueue(job({}, suite_of("sleep 0.3", std::nullopt))));
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::queue_full);
      ++rejected;
    }
  }
  EXPECT_GE(rejected, 3);
  for (const auto& id : ids) ASSERT_TRUE(q.wait(id, 60s));
}

TEST(Queue, DefaultCapacityIsTenPerWorker) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 3});
  EXPECT_EQ(q.max_pending(), 30u);
}

TEST(Queue, FailedPreparationMarksJobFailed) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 1});
  auto id = q.enqueue(job({{"../evil", "x"}}, suite_of("true", std::nullopt)));
  auto r = q.wait(id, 30s);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->state, JobState::failed);
  EXPECT_FALSE(r->report);
  EXPECT_FALSE(r->error.empty());
}

TEST(Queue, ConcurrentSubmissionsStayIsolated) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 4, .max_pending = 100});
  std::vector<std::pair<std::string, std::string>> ids;
  for (int i = 0; i < 40; ++i) {
    std::string content = "content-" + std::to_string(i);
    core::TestCase t;
    t.name = "t";
    t.run_command = "sleep 0.02; cat answer.txt";
    t.expected_output = content;
    t.comparison = core::Comparison::exact;
    t.points = 1;
    auto s = std::make_shared<const core::TestSuite>(std::vector<core::TestCase>{t});
    ids.emplace_back(q.enqueue(job({{"answer.txt", content}}, s)), content);
  }
  for (const auto& [id, content] : ids) {
    auto r = q.wait(id, 60s);
    ASSERT_TRUE(r && r->report);
    EXPECT_EQ(r->report->results[0].actual_stdout, content) << id;
  }
}

TEST(Queue, ReusesGivenJobId) {
  Grader grader(shared_sandbox(), {});
  GradingQueue q(grader, {.workers = 1});
  auto spec = job({}, suite_of("true", std::nullopt));
  spec.job_id = "fixed-id";
  EXPECT_EQ(q.enqueue(spec), "fixed-id");
  EXPECT_THROW(q.enqueue(spec), Error);
  ASSERT_TRUE(q.wait("fixed-id", 30s));
}

}  // namespace
}  // namespace gradeforge::engine
