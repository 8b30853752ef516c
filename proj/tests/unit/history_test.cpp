#include <gtest/gtest.h>
#include <sys/stat.h>

#include <chrono>
#include <functional>
#include <random>
#include <thread>

#include "jms/cluster/adapter.hpp"
#include "jms/cluster/executor.hpp"
#include "jms/common/crypto.hpp"
#include "jms/common/error.hpp"
#include "jms/history/accounting.hpp"
#include "jms/history/blob_store.hpp"
#include "jms/history/history_store.hpp"
#include "jms/history/poller.hpp"
#include "jms/history/snapshot.hpp"
#include "support/temp_dir.hpp"
#include "support/tree.hpp"

using namespace jms;
using namespace jms::history;
using namespace std::chrono_literals;
using jms::testing::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInternal;
}

}  // namespace

// ---------------------------------------------------------------------------
// blob store and snapshots
// ---------------------------------------------------------------------------

TEST(BlobStore, LayoutAndDedup) {
  TempDir dir;
  BlobStore blobs(dir.path() / "blobs");
  const auto h = blobs.put("hello");
  EXPECT_EQ(h, "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "blobs" / "2c" / h));
  EXPECT_EQ(blobs.put("hello"), h);
  EXPECT_EQ(blobs.object_count(), 1u);
  EXPECT_EQ(blobs.get(h), "hello");
  EXPECT_EQ(code_of([&] { blobs.get(std::string(64, 'a')); }), ErrorCode::kMissingBlob);
  EXPECT_EQ(code_of([&] { blobs.get("../../etc/passwd"); }), ErrorCode::kMissingBlob);
}

TEST(Snapshot, EmptyDirectory) {
  TempDir dir;
  BlobStore blobs(dir.path() / "blobs");
  std::filesystem::create_directory(dir.path() / "w");
  auto m = take_snapshot(dir.path() / "w", blobs);
  EXPECT_TRUE(m.entries.empty());
  restore_snapshot(m, dir.path() / "r", blobs);
  EXPECT_TRUE(std::filesystem::is_empty(dir.path() / "r"));
}

TEST(Snapshot, RandomTreesRoundTripByteIdentical) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    TempDir dir;
    BlobStore blobs(dir.path() / "blobs");
    const auto src = dir.path() / "src";
    auto stats = jms::testing::random_tree(rng, src);
    const auto before = jms::testing::tree_digest(src);

    auto m = take_snapshot(src, blobs);
    EXPECT_TRUE(std::is_sorted(m.entries.begin(), m.entries.end(), [](auto& a, auto& b) { return a.path < b.path; }));
    EXPECT_EQ(m.total_bytes, static_cast<std::int64_t>(stats.bytes));
    EXPECT_EQ(blobs.object_count(), stats.distinct_contents.size());

    // Dedup: a second snapshot of the same content adds nothing.
    const auto count = blobs.object_count();
    EXPECT_EQ(take_snapshot(src, blobs), m);
    EXPECT_EQ(blobs.object_count(), count);

    std::filesystem::remove_all(src);
    restore_snapshot(m, src, blobs);
    ASSERT_EQ(jms::testing::tree_digest(src), before) << "trial " << trial;

    // Manifest survives JSON.
    EXPECT_EQ(nlohmann::json(m).get<SnapshotManifest>(), m);
  }
}

TEST(Snapshot, RestoreOverwritesManifestedPathsOnly) {
  TempDir dir;
  BlobStore blobs(dir.path() / "blobs");
  const auto w = dir.path() / "w";
  jms::testing::spit(w / "keep.txt", "v1");
  jms::testing::spit(w / "sub/a.txt", "a1");
  auto m = take_snapshot(w, blobs);
  jms::testing::spit(w / "keep.txt", "v2");
  jms::testing::spit(w / "extra.txt", "new");
  std::filesystem::remove_all(w / "sub");
  jms::testing::spit(w / "sub", "now a file");
  restore_snapshot(m, w, blobs);
  EXPECT_EQ(jms::testing::slurp(w / "keep.txt"), "v1");
  EXPECT_EQ(jms::testing::slurp(w / "sub/a.txt"), "a1");
  EXPECT_EQ(jms::testing::slurp(w / "extra.txt"), "new");
}

TEST(Snapshot, RestoreDoesNotFollowPlantedSymlinks) {
  TempDir dir;
  BlobStore blobs(dir.path() / "blobs");
  const auto w = dir.path() / "w";
  jms::testing::spit(w / "sub/a.txt", "a1");
  auto m = take_snapshot(w, blobs);
  std::filesystem::remove_all(w / "sub");
  std::filesystem::create_directories(dir.path() / "outside");
  std::filesystem::create_directory_symlink(dir.path() / "outside", w / "sub");
  restore_snapshot(m, w, blobs);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "outside/a.txt"));
  EXPECT_EQ(jms::testing::slurp(w / "sub/a.txt"), "a1");
}

TEST(Snapshot, Errors) {
  TempDir dir;
  BlobStore blobs(dir.path() / "blobs");
  const auto w = dir.path() / "w";
  jms::testing::spit(w / "a.txt", "a");
  auto m = take_snapshot(w, blobs);
  blobs.remove(m.entries[0].hash);
  EXPECT_EQ(code_of([&] { restore_snapshot(m, dir.path() / "r", blobs); }), ErrorCode::kMissingBlob);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "r"));

  ASSERT_EQ(::mkfifo((w / "pipe").c_str(), 0644), 0);
  EXPECT_EQ(code_of([&] { take_snapshot(w, blobs); }), ErrorCode::kIoFailure);

  SnapshotManifest evil;
  evil.entries.push_back(ManifestEntry{"../escape", ManifestEntry::Kind::kDirectory, 0, "", "", 0755});
  EXPECT_EQ(code_of([&] { restore_snapshot(evil, dir.path() / "r2", blobs); }), ErrorCode::kIoFailure);
}

// ---------------------------------------------------------------------------
// accounting
// ---------------------------------------------------------------------------

namespace {

AccountingRecord start(const std::string& id) {
  AccountingRecord r;
  r.job_id = id;
  r.event = AccountingRecord::Event::kStart;
  r.timestamp = from_millis(1000);
  r.node = "n1";
  return r;
}

AccountingRecord end(const std::string& id, bool start_absent = false) {
  AccountingRecord r;
  r.job_id = id;
  r.event = AccountingRecord::Event::kEnd;
  r.timestamp = from_millis(2000);
  r.outcome = "Exited";
  r.exit_code = 0;
  r.resources_used = ResourcesUsed{1.5, 4096, 1.0};
  r.start_absent = start_absent;
  return r;
}

}  // namespace

TEST(Accounting, OneStartOneEnd) {
  TempDir dir;
  AccountingLog log(dir.path() / "accounting.jsonl");
  log.record(start("1.jms"));
  log.record(end("1.jms"));
  auto recs = log.records_for("1.jms");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].event, AccountingRecord::Event::kStart);
  EXPECT_EQ(recs[1], end("1.jms"));
}

TEST(Accounting, DuplicatesRejectedAndLogUnchanged) {
  TempDir dir;
  const auto file = dir.path() / "accounting.jsonl";
  {
    AccountingLog log(file);
    log.record(start("1.jms"));
    log.record(end("1.jms"));
  }
  const auto before = jms::testing::slurp(file);
  AccountingLog reopened(file);  // dedup state survives a restart
  EXPECT_EQ(code_of([&] { reopened.record(end("1.jms")); }), ErrorCode::kDuplicateEvent);
  EXPECT_EQ(code_of([&] { reopened.record(start("1.jms")); }), ErrorCode::kDuplicateEvent);
  EXPECT_EQ(code_of([&] { reopened.record(end("2.jms")); }), ErrorCode::kDuplicateEvent);
  EXPECT_EQ(jms::testing::slurp(file), before);
}

TEST(Accounting, EndOnlyForJobCanceledBeforeStart) {
  TempDir dir;
  AccountingLog log(dir.path() / "accounting.jsonl");
  log.record(end("3.jms", /*start_absent=*/true));
  auto recs = log.records_for("3.jms");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_TRUE(recs[0].start_absent);
}

// ---------------------------------------------------------------------------
// history store and cache
// ---------------------------------------------------------------------------

TEST(HistoryCache, SecondReadIsAHit) {
  TempDir dir;
  HistoryStore store(dir.path());
  store.put("job:1", {{"x", 1}});
  HistoryCache cache(store);
  ASSERT_TRUE(cache.get("job:1"));
  EXPECT_EQ(cache.misses(), 1u);
  const auto reads = store.read_count();
  ASSERT_TRUE(cache.get("job:1"));
  EXPECT_EQ(cache.hits(), 1u);
  EXPECT_EQ(store.read_count(), reads);
}

TEST(HistoryCache, WriteThenReadAndTombstones) {
  TempDir dir;
  HistoryStore store(dir.path());
  HistoryCache cache(store);
  EXPECT_EQ(cache.put("k", 1), 1u);
  EXPECT_EQ(cache.put("k", 2), 2u);
  EXPECT_EQ(cache.get("k")->value, 2);
  EXPECT_EQ(cache.get("k")->version, 2u);
  cache.erase("k");
  EXPECT_FALSE(cache.get("k"));
  EXPECT_TRUE(store.keys().empty());
  EXPECT_EQ(cache.put("k", 3), 4u);

  HistoryStore reopened(dir.path());
  EXPECT_EQ(reopened.get("k")->version, 4u);
  EXPECT_EQ(reopened.keys(), std::vector<std::string>{"k"});
}

TEST(HistoryCache, UpdateIsReadModifyWrite) {
  TempDir dir;
  HistoryStore store(dir.path());
  HistoryCache cache(store);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        cache.update("counter", [](const nlohmann::json& cur) -> std::optional<nlohmann::json> {
          return cur.is_null() ? 1 : cur.get<int>() + 1;
        });
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(cache.get("counter")->value, 200);
  EXPECT_EQ(cache.get("counter")->version, 200u);
}

TEST(HistoryCache, CoherenceUnderRandomInterleavings) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    TempDir dir;
    HistoryStore store(dir.path());
    HistoryCache cache(store);
    const std::vector<std::string> keys = {"a", "b", "c"};
    std::atomic<std::uint64_t> committed[3] = {0, 0, 0};
    std::atomic<bool> done{false};
    std::atomic<int> violations{0};

    std::thread writer([&] {
      std::mt19937 rng(seed);
      for (int i = 0; i < 300; ++i) {
        const auto k = rng() % 3;
        const auto v = cache.put(keys[k], {{"i", i}});
        committed[k].store(v);
      }
      done = true;
    });
    std::vector<std::thread> readers;
    for (int r = 0; r < 3; ++r) {
      readers.emplace_back([&, r] {
        std::mt19937 rng(seed * 31 + r);
        std::uint64_t last_seen[3] = {0, 0, 0};
        while (!done) {
          const auto k = rng() % 3;
          const auto floor = committed[k].load();
          auto got = cache.get(keys[k]);
          const auto v = got ? got->version : 0;
          // Never older than a completed write, never going backwards,
          // and the value at version v is the store's value at v.
          if (v < floor || v < last_seen[k]) ++violations;
          if (got && got->value != nlohmann::json{{"i", got->value.at("i")}}) ++violations;
          last_seen[k] = v;
        }
      });
    }
    writer.join();
    for (auto& t : readers) t.join();
    EXPECT_EQ(violations.load(), 0) << "seed " << seed;
    for (std::size_t k = 0; k < 3; ++k) {
      auto cached = cache.get(keys[k]);
      auto stored = store.get(keys[k]);
      if (!stored) continue;
      EXPECT_EQ(cached->version, stored->version);
      EXPECT_EQ(cached->value, stored->value);
    }
  }
}

TEST(HistoryCache, SlowLoadNeverRollsBack) {
  TempDir dir;
  HistoryStore store(dir.path());
  store.put("k", 1);
  HistoryCache cache(store);
  auto stale = store.get("k");  // a reader that loaded v1 ...
  cache.put("k", 2);           // ... then a writer commits v2
  // Simulate the slow reader finishing its install through a fresh miss path.
  HistoryCache other(store);
  EXPECT_EQ(other.get("k")->version, 2u);
  EXPECT_EQ(cache.get("k")->version, 2u);
  EXPECT_EQ(stale->version, 1u);
}

// ---------------------------------------------------------------------------
// poller
// ---------------------------------------------------------------------------

TEST(Poller, RefreshesRunningJobsOnly) {
  ManualClock clock;
  auto sim = std::make_shared<cluster::SimulatedLauncher>(clock);
  cluster::Executor ex({&clock, sim, {}, ".", {}});
  cluster::EmbeddedAdapter adapter(ex);
  ex.add_node("n1", 4, 1LL << 30);
  std::map<std::string, int> seen;
  Poller poller(ex, adapter, clock, [&](const std::string& id, const ResourcesUsed&, Timestamp) {
    ++seen[id];
    return true;
  });
  EXPECT_EQ(poller.poll_once(), 0);
  cluster::JobSpec s;
  s.command = "true";
  s.resources.memory_bytes = 1 << 20;
  auto a = ex.submit(s);
  auto b = ex.submit(s);
  ex.step();
  sim->finish(b, 0);
  clock.advance(2s);
  ex.step();
  EXPECT_EQ(poller.poll_once(), 1);
  EXPECT_EQ(seen[a], 1);
  EXPECT_EQ(seen[b], 0);
  EXPECT_EQ(poller.interval(), kDefaultPollInterval);
  EXPECT_EQ(kDefaultPollInterval, 30s);
}

TEST(Poller, HundredMillisecondIntervalCollectsFiveSamplesFromOneSecondJob) {
  TempDir dir;
  cluster::ExecutorOptions opts;
  opts.settings.tick_interval_seconds = 0.1;
  cluster::Executor ex(opts);
  cluster::EmbeddedAdapter adapter(ex);
  ex.add_node("n1", 2, 1LL << 30);
  SystemClock clock;
  std::mutex mu;
  std::vector<ResourcesUsed> samples;
  std::string target;
  Poller poller(ex, adapter, clock, [&](const std::string& id, const ResourcesUsed& u, Timestamp) {
    std::lock_guard l(mu);
    if (id != target) return false;
    samples.push_back(u);
    return true;
  });
  cluster::JobSpec s;
  s.command = "sleep 1";
  s.working_dir = dir.path().string();
  s.resources.memory_bytes = 1 << 20;
  {
    std::lock_guard l(mu);
    target = ex.submit(s);
  }
  ex.start();
  poller.start(100ms);
  for (int i = 0; i < 300 && !cluster::is_terminal(ex.job(target).state); ++i) std::this_thread::sleep_for(10ms);
  poller.stop();
  ex.stop();
  std::lock_guard l(mu);
  EXPECT_GE(samples.size(), 5u);
}

TEST(Poller, ParsesQstatResources) {
  auto u = resources_from_qstat({{"resources_used.cput", "00:01:02"},
                                 {"resources_used.mem", "10kb"},
                                 {"resources_used.walltime", "01:00:00"}});
  EXPECT_EQ(u.cpu_seconds, 62.0);
  EXPECT_EQ(u.peak_memory_bytes, 10240);
  EXPECT_EQ(u.walltime_seconds, 3600.0);
}
