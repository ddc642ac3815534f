#include "batdeg/scheduler/scheduler.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"
#include "batdeg/protocol/io.hpp"

namespace batdeg::scheduler {

using nlohmann::json;

WallClock::WallClock(std::chrono::milliseconds tick) : origin_(std::chrono::steady_clock::now()), tick_(tick) {
    if (tick.count() <= 0) {
        throw ValidationError("wall clock tick must be positive");
    }
}

std::uint64_t WallClock::now() const {
    const auto dt = std::chrono::steady_clock::now() - origin_;
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(dt) / tick_);
}

// ---------------------------------------------------------------------------
// VirtualCycler

VirtualCycler::VirtualCycler(const Clock& clock, VirtualCyclerOptions opts) : clock_(clock), opts_(std::move(opts)) {
    if (opts_.ticks_per_cycle == 0) {
        throw ValidationError("ticks_per_cycle must be positive");
    }
}

void VirtualCycler::start(const SpecRef& spec, std::size_t resume_cycle) {
    if (resume_cycle > spec.cycles) {
        throw ValidationError("resume cycle " + std::to_string(resume_cycle) + " beyond spec " + spec.spec_id +
                              " length " + std::to_string(spec.cycles));
    }
    spec_ = spec;
    resume_ = resume_cycle;
    started_ = clock_.now();
    last_reported_ = resume_cycle;
    done_ = false;
}

PollStatus VirtualCycler::poll() {
    if (!spec_) {
        throw RuntimeError("poll on idle cycler");
    }
    PollStatus st;
    st.spec_id = spec_->spec_id;
    if (opts_.fail_specs.count(spec_->spec_id) != 0) {
        st.failed = true;
        st.cycles_completed = last_reported_;
        return st;
    }
    const std::size_t remaining = spec_->cycles - resume_;
    const std::uint64_t elapsed = clock_.now() - started_;
    const std::size_t ran = static_cast<std::size_t>(std::min<std::uint64_t>(elapsed / opts_.ticks_per_cycle, remaining));
    last_reported_ = std::max(last_reported_, resume_ + ran);
    done_ = done_ || ran == remaining;
    st.cycles_completed = last_reported_;
    st.done = done_;
    st.finished_at = started_ + remaining * opts_.ticks_per_cycle;
    return st;
}

void VirtualCycler::stop() { spec_.reset(); }

// ---------------------------------------------------------------------------
// Serialization

std::string to_string(RunStatus s) { return s == RunStatus::completed ? "completed" : "failed"; }

RunStatus run_status_from_string(const std::string& s) {
    if (s == "completed") {
        return RunStatus::completed;
    }
    if (s == "failed") {
        return RunStatus::failed;
    }
    throw ValidationError("unknown run status '" + s + "'");
}

json RunSummary::to_json() const {
    return json{{"channel", channel},         {"spec_id", spec_id},   {"cycles", cycles},
                {"start_tick", start_tick},   {"finish_tick", finish_tick},
                {"end_tick", end_tick},       {"wall_ticks", end_tick - start_tick},
                {"status", to_string(status)}};
}

RunSummary RunSummary::from_json(const json& j) {
    try {
        RunSummary s;
        s.channel = j.at("channel").get<std::string>();
        s.spec_id = j.at("spec_id").get<std::string>();
        s.cycles = j.at("cycles").get<std::size_t>();
        s.start_tick = j.at("start_tick").get<std::uint64_t>();
        s.finish_tick = j.at("finish_tick").get<std::uint64_t>();
        s.end_tick = j.at("end_tick").get<std::uint64_t>();
        s.status = run_status_from_string(j.at("status").get<std::string>());
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("run summary: ") + e.what());
    }
}

json Checkpoint::to_json() const {
    json chans = json::array();
    for (const auto& c : channels) {
        json done = json::array();
        for (const auto& s : c.completed) {
            done.push_back(s.to_json());
        }
        chans.push_back(json{{"channel", c.channel},
                             {"current_spec", c.current_spec ? json(*c.current_spec) : json(nullptr)},
                             {"cycles_completed", c.cycles_completed},
                             {"current_start", c.current_start},
                             {"completed", std::move(done)},
                             {"failed", c.failed}});
    }
    return json{{"version", kVersion}, {"written_tick", written_tick}, {"channels", std::move(chans)}};
}

Checkpoint Checkpoint::from_json(const json& j) {
    try {
        if (!j.is_object()) {
            throw ValidationError("checkpoint is not a JSON object");
        }
        const int v = j.at("version").get<int>();
        if (v != kVersion) {
            throw ValidationError("unsupported checkpoint version " + std::to_string(v));
        }
        Checkpoint cp;
        cp.written_tick = j.at("written_tick").get<std::uint64_t>();
        for (const auto& c : j.at("channels")) {
            ChannelState st;
            st.channel = c.at("channel").get<std::string>();
            if (!c.at("current_spec").is_null()) {
                st.current_spec = c.at("current_spec").get<std::string>();
            }
            st.cycles_completed = c.at("cycles_completed").get<std::size_t>();
            st.current_start = c.at("current_start").get<std::uint64_t>();
            for (const auto& s : c.at("completed")) {
                st.completed.push_back(RunSummary::from_json(s));
            }
            st.failed = c.at("failed").get<bool>();
            cp.channels.push_back(std::move(st));
        }
        return cp;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("checkpoint schema: ") + e.what());
    }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
    io::write_file_atomic(path, cp.to_json().dump(1) + "\n");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw RuntimeError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    try {
        return Checkpoint::from_json(j);
    } catch (const ValidationError& e) {
        throw RuntimeError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
}

std::vector<RunSummary> read_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw RuntimeError("cannot open " + path.string());
    }
    std::vector<RunSummary> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(RunSummary::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw RuntimeError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::map<std::string, std::uint64_t> max_idle(const std::vector<RunSummary>& log) {
    std::map<std::string, std::vector<const RunSummary*>> by;
    for (const auto& s : log) {
        by[s.channel].push_back(&s);
    }
    std::map<std::string, std::uint64_t> out;
    for (auto& [ch, v] : by) {
        std::stable_sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->start_tick < b->start_tick; });
        std::uint64_t worst = 0;
        for (std::size_t i = 1; i < v.size(); ++i) {
            const auto prev = v[i - 1]->finish_tick;
            const auto next = v[i]->start_tick;
            worst = std::max<std::uint64_t>(worst, next > prev ? next - prev : 0);
        }
        out[ch] = worst;
    }
    return out;
}

std::vector<ChannelQueue> load_queues(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw ValidationError("queue directory " + dir.string() + " does not exist");
    }
    std::vector<fs::path> chans;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) {
            chans.push_back(e.path());
        }
    }
    std::sort(chans.begin(), chans.end());
    std::vector<ChannelQueue> out;
    for (const auto& c : chans) {
        ChannelQueue q;
        q.channel = c.filename().string();
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(c)) {
            if (e.is_regular_file() && e.path().extension() == ".json") {
                files.push_back(e.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto spec = protocol::read_protocol(f);
            q.specs.push_back(SpecRef{spec.protocol_id, spec.cycles});
        }
        out.push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Master: owns assignments, checkpoint and log. Both campaign drivers feed it.

namespace {

struct Crash {};

class Master {
public:
    Master(const std::vector<ChannelQueue>& queues, const CampaignOptions& opts, const Checkpoint* resume)
        : queues_(queues), opts_(opts) {
        if (opts.poll_interval == 0) {
            throw ValidationError("poll_interval must be positive");
        }
        std::set<std::string> names;
        for (const auto& q : queues) {
            if (!names.insert(q.channel).second) {
                throw ValidationError("duplicate channel '" + q.channel + "'");
            }
            for (const auto& s : q.specs) {
                if (s.cycles == 0) {
                    throw ValidationError("spec " + s.spec_id + " on channel " + q.channel + " has zero cycles");
                }
            }
            ChannelState st;
            st.channel = q.channel;
            state_.channels.push_back(std::move(st));
        }
        if (resume != nullptr) {
            adopt(*resume);
        }
    }

    std::size_t size() const { return queues_.size(); }
    const ChannelState& channel(std::size_t c) const { return state_.channels[c]; }
    const Checkpoint& state() const { return state_; }
    std::size_t steps() const { return steps_; }
    const std::vector<RunSummary>& log() const { return log_; }

    void step() {
        ++steps_;
        if (opts_.crash_after_steps && steps_ >= *opts_.crash_after_steps) {
            throw Crash{};
        }
    }

    /// Next spec for an idle channel, or null when the channel is finished.
    const SpecRef* next_spec(std::size_t c) const {
        const auto& st = state_.channels[c];
        if (st.failed || st.current_spec) {
            return nullptr;
        }
        const auto i = st.completed.size();
        return i < queues_[c].specs.size() ? &queues_[c].specs[i] : nullptr;
    }

    const SpecRef& current_ref(std::size_t c) const { return queues_[c].specs[state_.channels[c].completed.size()]; }

    void on_assign(std::size_t c, std::uint64_t now) {
        auto& st = state_.channels[c];
        st.current_spec = current_ref(c).spec_id;
        st.cycles_completed = 0;
        st.current_start = now;
        persist(now);
    }

    void on_progress(std::size_t c, const PollStatus& p, std::uint64_t now) {
        auto& st = state_.channels[c];
        st.cycles_completed = std::max(st.cycles_completed, p.cycles_completed);
        persist(now);
    }

    void on_finish(std::size_t c, const PollStatus& p, std::uint64_t now) {
        auto& st = state_.channels[c];
        RunSummary s;
        s.channel = st.channel;
        s.spec_id = *st.current_spec;
        s.cycles = p.cycles_completed;
        s.start_tick = st.current_start;
        s.finish_tick = p.done ? p.finished_at : now;
        s.end_tick = now;
        s.status = p.failed ? RunStatus::failed : RunStatus::completed;
        st.failed = p.failed;
        st.current_spec.reset();
        st.cycles_completed = 0;
        st.completed.push_back(s);
        // Checkpoint first: a summary that reaches the log is always in the
        // checkpoint, and recovery rebuilds the log from the checkpoint.
        persist(now);
        append_log(s);
    }

    void rewrite_log() {
        log_.clear();
        for (const auto& st : state_.channels) {
            log_.insert(log_.end(), st.completed.begin(), st.completed.end());
        }
        const auto rank = channel_rank();
        std::stable_sort(log_.begin(), log_.end(), [&](const RunSummary& a, const RunSummary& b) {
            if (a.end_tick != b.end_tick) {
                return a.end_tick < b.end_tick;
            }
            return rank.at(a.channel) < rank.at(b.channel);
        });
        if (!opts_.log.empty()) {
            std::string text;
            for (const auto& s : log_) {
                text += s.to_json().dump() + "\n";
            }
            io::write_file_atomic(opts_.log, text);
        }
    }

    void persist(std::uint64_t now) {
        step();
        state_.written_tick = now;
        if (!opts_.checkpoint.empty()) {
            write_checkpoint(opts_.checkpoint, state_);
        }
    }

    bool idle() const {
        for (std::size_t c = 0; c < size(); ++c) {
            if (state_.channels[c].current_spec || next_spec(c) != nullptr) {
                return false;
            }
        }
        return true;
    }

private:
    std::map<std::string, std::size_t> channel_rank() const {
        std::map<std::string, std::size_t> r;
        for (std::size_t i = 0; i < queues_.size(); ++i) {
            r[queues_[i].channel] = i;
        }
        return r;
    }

    void append_log(const RunSummary& s) {
        step();
        log_.push_back(s);
        if (!opts_.log.empty()) {
            std::ofstream out(opts_.log, std::ios::app);
            if (!out) {
                throw RuntimeError("cannot append to " + opts_.log.string());
            }
            out << s.to_json().dump() << "\n";
        }
    }

    void adopt(const Checkpoint& cp) {
        if (cp.channels.size() != queues_.size()) {
            throw ValidationError("checkpoint has " + std::to_string(cp.channels.size()) + " channels, queues have " +
                                  std::to_string(queues_.size()));
        }
        for (std::size_t c = 0; c < queues_.size(); ++c) {
            const auto& st = cp.channels[c];
            const auto& q = queues_[c];
            if (st.channel != q.channel) {
                throw ValidationError("checkpoint channel '" + st.channel + "' does not match queue '" + q.channel + "'");
            }
            if (st.completed.size() > q.specs.size()) {
                throw ValidationError("checkpoint lists more completed specs than channel " + q.channel + " queues");
            }
            for (std::size_t i = 0; i < st.completed.size(); ++i) {
                if (st.completed[i].spec_id != q.specs[i].spec_id) {
                    throw ValidationError("checkpoint spec '" + st.completed[i].spec_id + "' on channel " + q.channel +
                                          " does not match queue position " + std::to_string(i));
                }
            }
            if (st.current_spec) {
                if (st.completed.size() >= q.specs.size() || q.specs[st.completed.size()].spec_id != *st.current_spec) {
                    throw ValidationError("checkpoint in-flight spec '" + *st.current_spec + "' on channel " + q.channel +
                                          " is not next in its queue");
                }
                if (st.cycles_completed > q.specs[st.completed.size()].cycles) {
                    throw ValidationError("checkpoint cycle count exceeds spec length on channel " + q.channel);
                }
            }
        }
        state_ = cp;
    }

    const std::vector<ChannelQueue>& queues_;
    const CampaignOptions& opts_;
    Checkpoint state_;
    std::vector<RunSummary> log_;
    std::size_t steps_ = 0;
};

std::vector<std::unique_ptr<CyclerBackend>> make_backends(const std::vector<ChannelQueue>& queues, const Clock& clock,
                                                          const BackendFactory& factory) {
    std::vector<std::unique_ptr<CyclerBackend>> out;
    for (const auto& q : queues) {
        out.push_back(factory ? factory(q.channel) : std::make_unique<VirtualCycler>(clock));
        if (!out.back()) {
            throw ValidationError("backend factory returned null for channel " + q.channel);
        }
    }
    return out;
}

CampaignResult finish(const Master& m, std::uint64_t now, bool crashed) {
    CampaignResult r;
    r.log = m.log();
    r.final_state = m.state();
    r.end_tick = now;
    r.steps = m.steps();
    r.crashed = crashed;
    return r;
}

CampaignResult simulate(const std::vector<ChannelQueue>& queues, SimClock& clock, const CampaignOptions& opts,
                        const BackendFactory& factory, const Checkpoint* resume) {
    Master m(queues, opts, resume);
    auto backends = make_backends(queues, clock, factory);
    const std::size_t n = m.size();
    std::vector<std::uint64_t> poll_base(n, 0);

    auto launch = [&](std::size_t c, std::size_t resume_cycle) {
        backends[c]->start(m.current_ref(c), resume_cycle);
        poll_base[c] = clock.now();
    };
    auto assign_next = [&](std::size_t c) {
        if (m.next_spec(c) != nullptr) {
            m.on_assign(c, clock.now());
            launch(c, 0);
        }
    };

    try {
        if (resume != nullptr) {
            m.rewrite_log();
        }
        m.persist(clock.now());
        for (std::size_t c = 0; c < n; ++c) {
            if (m.channel(c).current_spec) {
                launch(c, opts.restart_inflight ? 0 : m.channel(c).cycles_completed);
            } else {
                assign_next(c);
            }
        }
        const std::uint64_t t0 = clock.now();
        while (!m.idle()) {
            if (clock.now() - t0 >= opts.max_ticks) {
                throw RuntimeError("campaign exceeded " + std::to_string(opts.max_ticks) + " ticks");
            }
            clock.advance(1);
            const auto now = clock.now();
            for (std::size_t c = 0; c < n; ++c) {
                if (!m.channel(c).current_spec || (now - poll_base[c]) % opts.poll_interval != 0) {
                    continue;
                }
                PollStatus st;
                try {
                    st = backends[c]->poll();
                } catch (const RuntimeError&) {
                    st.failed = true;
                    st.cycles_completed = m.channel(c).cycles_completed;
                }
                m.step();
                if (st.done || st.failed) {
                    backends[c]->stop();
                    m.on_finish(c, st, now);
                    assign_next(c);
                } else {
                    m.on_progress(c, st, now);
                }
            }
        }
    } catch (const Crash&) {
        return finish(m, clock.now(), true);
    }
    return finish(m, clock.now(), false);
}

std::optional<Checkpoint> load_if_present(const CampaignOptions& opts) {
    if (opts.checkpoint.empty() || !std::filesystem::exists(opts.checkpoint)) {
        return std::nullopt;
    }
    return read_checkpoint(opts.checkpoint);
}

} // namespace

CampaignResult run_campaign(const std::vector<ChannelQueue>& queues, SimClock& clock, const CampaignOptions& opts,
                            const BackendFactory& factory) {
    if (!opts.log.empty()) {
        io::write_file_atomic(opts.log, "");
    }
    return simulate(queues, clock, opts, factory, nullptr);
}

CampaignResult recover(const std::vector<ChannelQueue>& queues, SimClock& clock, const CampaignOptions& opts,
                       const BackendFactory& factory) {
    const auto cp = load_if_present(opts);
    if (!cp) {
        return run_campaign(queues, clock, opts, factory);
    }
    return simulate(queues, clock, opts, factory, &*cp);
}

// ---------------------------------------------------------------------------
// Threaded driver

namespace {

struct Message {
    std::size_t channel;
    PollStatus status;
    std::uint64_t tick;
};

class Mailbox {
public:
    void push(Message m) {
        {
            std::lock_guard lock(mu_);
            q_.push_back(std::move(m));
        }
        cv_.notify_one();
    }
    Message pop() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !q_.empty(); });
        Message m = std::move(q_.front());
        q_.pop_front();
        return m;
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Message> q_;
};

} // namespace

CampaignResult run_campaign_threaded(const std::vector<ChannelQueue>& queues, const WallClock& clock,
                                     const CampaignOptions& opts, const BackendFactory& factory,
                                     const std::optional<Checkpoint>& resume) {
    Master m(queues, opts, resume ? &*resume : nullptr);
    auto backends = make_backends(queues, clock, factory);
    const std::size_t n = m.size();
    Mailbox box;
    std::atomic<bool> halt{false};
    std::vector<std::thread> monitors(n);
    std::size_t running = 0;

    // A monitor owns its channel's backend for the life of one spec and talks
    // to the master only through the mailbox.
    auto spawn = [&](std::size_t c, SpecRef spec, std::size_t resume_cycle) {
        if (monitors[c].joinable()) {
            monitors[c].join();
        }
        ++running;
        monitors[c] = std::thread([&, c, spec, resume_cycle] {
            CyclerBackend& b = *backends[c];
            b.start(spec, resume_cycle);
            const auto period = clock.tick() * static_cast<long>(opts.poll_interval);
            auto next = std::chrono::steady_clock::now();
            while (!halt.load()) {
                next += period;
                std::this_thread::sleep_until(next);
                PollStatus st;
                try {
                    st = b.poll();
                } catch (const RuntimeError&) {
                    st.failed = true;
                }
                const bool last = st.done || st.failed;
                if (last) {
                    b.stop();
                }
                box.push(Message{c, st, clock.now()});
                if (last) {
                    return;
                }
            }
            b.stop();
        });
    };
    auto assign_next = [&](std::size_t c) {
        if (const SpecRef* s = m.next_spec(c)) {
            m.on_assign(c, clock.now());
            spawn(c, *s, 0);
        }
    };
    auto shutdown = [&] {
        halt.store(true);
        for (auto& t : monitors) {
            if (t.joinable()) {
                t.join();
            }
        }
    };

    bool crashed = false;
    try {
        if (resume) {
            m.rewrite_log();
        } else if (!opts.log.empty()) {
            io::write_file_atomic(opts.log, "");
        }
        m.persist(clock.now());
        for (std::size_t c = 0; c < n; ++c) {
            if (m.channel(c).current_spec) {
                spawn(c, m.current_ref(c), opts.restart_inflight ? 0 : m.channel(c).cycles_completed);
            } else {
                assign_next(c);
            }
        }
        while (running > 0) {
            Message msg = box.pop();
            m.step();
            if (msg.status.done || msg.status.failed) {
                --running;
                if (msg.status.failed) {
                    msg.status.cycles_completed = m.channel(msg.channel).cycles_completed;
                }
                m.on_finish(msg.channel, msg.status, msg.tick);
                assign_next(msg.channel);
            } else {
                m.on_progress(msg.channel, msg.status, msg.tick);
            }
        }
    } catch (const Crash&) {
        crashed = true;
    } catch (...) {
        shutdown();
        throw;
    }
    shutdown();
    return finish(m, clock.now(), crashed);
}

} // namespace batdeg::scheduler
