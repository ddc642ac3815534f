#include <atomic>
#include <filesystem>
#include <map>
#include <random>
#include <thread>

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"
#include "batdeg/protocol/io.hpp"
#include "batdeg/scheduler/scheduler.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace batdeg;
using namespace batdeg::scheduler;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("batdeg_sched_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<ChannelQueue> random_queues(std::size_t channels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> n_specs(0, 5);
    std::uniform_int_distribution<int> len(1, 25);
    std::vector<ChannelQueue> qs;
    for (std::size_t c = 0; c < channels; ++c) {
        ChannelQueue q;
        q.channel = "ch" + std::to_string(c);
        const int k = n_specs(rng);
        for (int i = 0; i < k; ++i) {
            q.specs.push_back(SpecRef{q.channel + "-spec" + std::to_string(i), static_cast<std::size_t>(len(rng))});
        }
        qs.push_back(std::move(q));
    }
    return qs;
}

std::map<std::pair<std::string, std::string>, int> completions(const std::vector<RunSummary>& log) {
    std::map<std::pair<std::string, std::string>, int> m;
    for (const auto& s : log) {
        m[{s.channel, s.spec_id}] += 1;
    }
    return m;
}

struct RecordingBackend final : CyclerBackend {
    RecordingBackend(const Clock& clock, std::vector<std::size_t>& starts) : inner(clock), starts(starts) {}
    void start(const SpecRef& spec, std::size_t resume) override {
        starts.push_back(resume);
        inner.start(spec, resume);
    }
    PollStatus poll() override { return inner.poll(); }
    void stop() override { inner.stop(); }
    VirtualCycler inner;
    std::vector<std::size_t>& starts;
};

} // namespace

TEST_CASE("virtual cycler reports monotone progress, sticky done and resumes mid-spec") {
    SimClock clock;
    VirtualCycler cy(clock, VirtualCyclerOptions{2, {}});
    cy.start(SpecRef{"p", 5}, 0);
    std::size_t last = 0;
    bool seen_done = false;
    for (int t = 0; t < 14; ++t) {
        const auto st = cy.poll();
        CHECK(st.cycles_completed >= last);
        CHECK(st.cycles_completed == std::min<std::size_t>(5, clock.now() / 2));
        if (seen_done) {
            CHECK(st.done);
        }
        seen_done = seen_done || st.done;
        last = st.cycles_completed;
        clock.advance();
    }
    CHECK(seen_done);

    cy.start(SpecRef{"p", 5}, 3);
    const auto t0 = clock.now();
    CHECK(cy.poll().cycles_completed == 3);
    clock.advance(4);
    const auto st = cy.poll();
    CHECK(st.done);
    CHECK(st.cycles_completed == 5);
    CHECK(st.finished_at == t0 + 4);
    CHECK_THROWS_AS(cy.start(SpecRef{"p", 5}, 6), ValidationError);
}

TEST_CASE("single channel runs its queue in order with no idle gaps") {
    SimClock clock;
    std::vector<ChannelQueue> qs{{"A", {{"s1", 10}, {"s2", 10}, {"s3", 10}}}};
    const auto r = run_campaign(qs, clock, CampaignOptions{});
    REQUIRE(r.log.size() == 3);
    CHECK(r.log[0].spec_id == "s1");
    CHECK(r.log[1].spec_id == "s2");
    CHECK(r.log[2].spec_id == "s3");
    CHECK(r.log[0].start_tick == 0);
    CHECK(r.log[2].end_tick == 30);
    CHECK(r.end_tick == 30);
    for (const auto& s : r.log) {
        CHECK(s.cycles == 10);
        CHECK(s.status == RunStatus::completed);
    }
}

TEST_CASE("empty queues complete immediately with an empty log") {
    SimClock clock;
    const auto r = run_campaign({{"A", {}}, {"B", {}}}, clock, CampaignOptions{});
    CHECK(r.log.empty());
    CHECK(r.end_tick == 0);
    CHECK_FALSE(r.crashed);
    const auto none = run_campaign({}, clock, CampaignOptions{});
    CHECK(none.log.empty());
}

TEST_CASE("inter-spec idle stays within the poll interval plus one tick") {
    for (std::uint64_t poll : {1, 2, 5}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            SimClock clock;
            const auto qs = random_queues(8, 100 + seed);
            CampaignOptions opts;
            opts.poll_interval = poll;
            const auto r = run_campaign(qs, clock, opts);
            std::size_t expected = 0;
            for (const auto& q : qs) {
                expected += q.specs.size();
            }
            CHECK(r.log.size() == expected);
            for (const auto& [ch, idle] : max_idle(r.log)) {
                CHECK(idle <= poll + 1);
            }
            // Per-channel order follows the queue.
            for (const auto& q : qs) {
                std::size_t i = 0;
                for (const auto& s : r.log) {
                    if (s.channel == q.channel) {
                        CHECK(s.spec_id == q.specs[i++].spec_id);
                    }
                }
            }
        }
    }
}

TEST_CASE("a failing backend only stops its own channel") {
    SimClock clock;
    std::vector<ChannelQueue> qs{{"A", {{"a1", 3}, {"bad", 3}, {"a3", 3}}}, {"B", {{"b1", 4}, {"b2", 4}}}};
    BackendFactory f = [&](const std::string&) {
        return std::make_unique<VirtualCycler>(clock, VirtualCyclerOptions{1, {"bad"}});
    };
    const auto r = run_campaign(qs, clock, CampaignOptions{}, f);
    const auto m = completions(r.log);
    CHECK(m.count({"A", "a3"}) == 0);
    CHECK(m.at({"B", "b2"}) == 1);
    CHECK(r.final_state.channels[0].failed);
    CHECK_FALSE(r.final_state.channels[1].failed);
    for (const auto& s : r.log) {
        CHECK(s.status == (s.spec_id == "bad" ? RunStatus::failed : RunStatus::completed));
    }
}

TEST_CASE("checkpoint round-trips and corrupt files are refused with the path") {
    const auto dir = scratch("cp");
    Checkpoint cp;
    cp.written_tick = 42;
    ChannelState a;
    a.channel = "A";
    a.current_spec = "x";
    a.cycles_completed = 7;
    a.current_start = 30;
    a.completed.push_back(RunSummary{"A", "w", 5, 0, 5, 6, RunStatus::completed});
    cp.channels.push_back(a);
    ChannelState b;
    b.channel = "B";
    b.failed = true;
    cp.channels.push_back(b);
    const auto path = dir / "cp.json";
    write_checkpoint(path, cp);
    CHECK(read_checkpoint(path) == cp);

    io::write_file_atomic(path, "{\"version\": 1, \"channels\": [");
    try {
        read_checkpoint(path);
        FAIL("expected failure");
    } catch (const RuntimeError& e) {
        CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    }
    io::write_file_atomic(path, "{\"version\": 9, \"written_tick\": 0, \"channels\": []}");
    CHECK_THROWS_AS(read_checkpoint(path), RuntimeError);

    CampaignOptions opts;
    opts.checkpoint = path;
    SimClock clock;
    CHECK_THROWS_AS(recover({{"A", {{"s", 2}}}}, clock, opts), RuntimeError);
}

TEST_CASE("recover without a checkpoint behaves as a fresh campaign") {
    const auto dir = scratch("fresh");
    const auto qs = random_queues(4, 7);
    CampaignOptions opts;
    opts.checkpoint = dir / "cp.json";
    opts.log = dir / "log.jsonl";
    SimClock c1;
    const auto a = recover(qs, c1, opts);
    CampaignOptions plain;
    SimClock c2;
    const auto b = run_campaign(qs, c2, plain);
    CHECK(a.log == b.log);
    CHECK(read_log(opts.log) == a.log);
    CHECK(read_checkpoint(opts.checkpoint) == a.final_state);
}

TEST_CASE("crash after the second of three specs reruns only the third") {
    const auto dir = scratch("kill2");
    std::vector<ChannelQueue> qs{{"A", {{"s1", 10}, {"s2", 10}, {"s3", 10}}}};
    CampaignOptions opts;
    opts.checkpoint = dir / "cp.json";
    opts.log = dir / "log.jsonl";
    // Find the first step at which two specs are on record.
    CampaignResult crashed;
    SimClock clock;
    for (std::size_t k = 1;; ++k) {
        opts.crash_after_steps = k;
        clock = SimClock{};
        crashed = run_campaign(qs, clock, opts);
        REQUIRE(crashed.crashed);
        if (fs::exists(opts.checkpoint) && read_checkpoint(opts.checkpoint).channels[0].completed.size() == 2) {
            break;
        }
    }
    opts.crash_after_steps.reset();
    std::vector<std::size_t> starts;
    const auto r = recover(qs, clock, opts, [&](const std::string&) {
        return std::make_unique<RecordingBackend>(clock, starts);
    });
    REQUIRE(starts.size() == 1);
    CHECK(starts[0] == 0);
    REQUIRE(r.log.size() == 3);
    CHECK(r.log[2].spec_id == "s3");
    CHECK(read_log(opts.log) == r.log);
}

TEST_CASE("in-flight spec resumes at the recorded cycle unless restart is configured") {
    const auto dir = scratch("resume");
    std::vector<ChannelQueue> qs{{"A", {{"long", 40}}}};
    for (bool restart : {false, true}) {
        CampaignOptions opts;
        opts.checkpoint = dir / "cp.json";
        opts.log = dir / "log.jsonl";
        opts.crash_after_steps = 20;
        SimClock clock;
        REQUIRE(run_campaign(qs, clock, opts).crashed);
        const auto recorded = read_checkpoint(opts.checkpoint).channels[0].cycles_completed;
        REQUIRE(recorded > 0);
        opts.crash_after_steps.reset();
        opts.restart_inflight = restart;
        std::vector<std::size_t> starts;
        const auto r = recover(qs, clock, opts, [&](const std::string&) {
            return std::make_unique<RecordingBackend>(clock, starts);
        });
        REQUIRE(starts.size() == 1);
        CHECK(starts[0] == (restart ? 0 : recorded));
        REQUIRE(r.log.size() == 1);
        CHECK(r.log[0].cycles == 40);
    }
}

TEST_CASE("crash at any step then recover completes every spec exactly once") {
    const auto dir = scratch("trials");
    const auto qs = random_queues(8, 2024);
    SimClock ref_clock;
    const auto ref = run_campaign(qs, ref_clock, CampaignOptions{});
    const auto want = completions(ref.log);
    std::size_t total = 0;
    for (const auto& q : qs) {
        total += q.specs.size();
    }
    REQUIRE(want.size() == total);

    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> pick(1, ref.steps);
    for (int trial = 0; trial < 100; ++trial) {
        CampaignOptions opts;
        opts.checkpoint = dir / "cp.json";
        opts.log = dir / "log.jsonl";
        opts.crash_after_steps = pick(rng);
        SimClock clock;
        const auto first = run_campaign(qs, clock, opts);
        CHECK(first.crashed);
        opts.crash_after_steps.reset();
        const auto second = recover(qs, clock, opts);
        CHECK_FALSE(second.crashed);
        const auto got = completions(read_log(opts.log));
        CHECK(got == want);
    }
}

TEST_CASE("readers never observe a torn checkpoint") {
    const auto dir = scratch("torn");
    const auto path = dir / "cp.json";
    std::atomic<bool> stop{false};
    std::atomic<int> bad{0};
    std::atomic<int> reads{0};
    Checkpoint seed;
    seed.channels.resize(1);
    write_checkpoint(path, seed);
    std::thread reader([&] {
        while (!stop.load()) {
            try {
                const auto cp = read_checkpoint(path);
                // Every written state has the same number of channels and summaries as its tick.
                if (cp.channels.size() != 1 || cp.channels[0].completed.size() != cp.written_tick) {
                    ++bad;
                }
            } catch (const std::exception&) {
                ++bad;
            }
            ++reads;
        }
    });
    for (std::uint64_t i = 0; i < 400; ++i) {
        Checkpoint cp;
        cp.written_tick = i;
        ChannelState st;
        st.channel = "A";
        for (std::uint64_t k = 0; k < i; ++k) {
            st.completed.push_back(RunSummary{"A", "spec-" + std::to_string(k), k, k, k, k, RunStatus::completed});
        }
        cp.channels.push_back(std::move(st));
        write_checkpoint(path, cp);
    }
    stop = true;
    reader.join();
    CHECK(reads.load() > 0);
    CHECK(bad.load() == 0);
}

TEST_CASE("threaded campaign completes every queue in order") {
    const auto dir = scratch("threaded");
    std::vector<ChannelQueue> qs{{"A", {{"a1", 3}, {"a2", 2}}}, {"B", {{"b1", 4}}}, {"C", {}}};
    CampaignOptions opts;
    opts.checkpoint = dir / "cp.json";
    opts.log = dir / "log.jsonl";
    WallClock clock(std::chrono::milliseconds(2));
    const auto r = run_campaign_threaded(qs, clock, opts);
    CHECK_FALSE(r.crashed);
    REQUIRE(r.log.size() == 3);
    const auto m = completions(read_log(opts.log));
    CHECK(m.size() == 3);
    std::vector<std::string> a;
    for (const auto& s : r.log) {
        if (s.channel == "A") {
            a.push_back(s.spec_id);
        }
        CHECK(s.cycles == (s.spec_id == "a1" ? 3u : s.spec_id == "a2" ? 2u : 4u));
    }
    CHECK(a == std::vector<std::string>{"a1", "a2"});
    CHECK(read_checkpoint(opts.checkpoint) == r.final_state);
}

TEST_CASE("queues load from per-channel directories in lexicographic order") {
    const auto dir = scratch("queues");
    fs::create_directories(dir / "ch1");
    fs::create_directories(dir / "ch0");
    for (const char* name : {"b", "a", "c"}) {
        protocol::ProtocolSpec s;
        s.protocol_id = std::string("p-") + name;
        s.steps.push_back(protocol::ProtocolStep{1.0, 2.0});
        s.cycles = 3;
        protocol::write_protocol(dir / "ch1" / (std::string(name) + ".json"), s);
    }
    const auto qs = load_queues(dir);
    REQUIRE(qs.size() == 2);
    CHECK(qs[0].channel == "ch0");
    CHECK(qs[0].specs.empty());
    REQUIRE(qs[1].specs.size() == 3);
    CHECK(qs[1].specs[0].spec_id == "p-a");
    CHECK(qs[1].specs[2].spec_id == "p-c");
    CHECK(qs[1].specs[1].cycles == 3);
    CHECK_THROWS_AS(load_queues(dir / "missing"), ValidationError);
}
