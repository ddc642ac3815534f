#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace batdeg::scheduler {

/// Monotone tick source. Simulated ticks are advanced by the campaign loop;
/// wall ticks are milliseconds since construction.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::uint64_t now() const = 0;
};

class SimClock final : public Clock {
public:
    explicit SimClock(std::uint64_t start = 0) : t_(start) {}
    std::uint64_t now() const override { return t_; }
    void advance(std::uint64_t dt = 1) { t_ += dt; }

private:
    std::uint64_t t_;
};

class WallClock final : public Clock {
public:
    explicit WallClock(std::chrono::milliseconds tick = std::chrono::milliseconds(1));
    std::uint64_t now() const override;
    std::chrono::milliseconds tick() const { return tick_; }

private:
    std::chrono::steady_clock::time_point origin_;
    std::chrono::milliseconds tick_;
};

/// One queued unit of work: a protocol run for `cycles` cycles.
struct SpecRef {
    std::string spec_id;
    std::size_t cycles = 1;

    bool operator==(const SpecRef&) const = default;
};

struct PollStatus {
    std::string spec_id;
    std::size_t cycles_completed = 0;
    bool done = false;
    bool failed = false;
    /// Tick at which the last cycle finished (valid when done).
    std::uint64_t finished_at = 0;
};

class CyclerBackend {
public:
    virtual ~CyclerBackend() = default;
    /// Begins `spec` with `resume_cycle` cycles already counted as done.
    virtual void start(const SpecRef& spec, std::size_t resume_cycle) = 0;
    virtual PollStatus poll() = 0;
    virtual void stop() = 0;
};

struct VirtualCyclerOptions {
    std::uint64_t ticks_per_cycle = 1;
    /// Specs whose start makes the channel report failure on first poll.
    std::set<std::string> fail_specs;
};

/// Runs specs against a clock: cycle k completes at start + k * ticks_per_cycle.
class VirtualCycler final : public CyclerBackend {
public:
    VirtualCycler(const Clock& clock, VirtualCyclerOptions opts = {});
    void start(const SpecRef& spec, std::size_t resume_cycle) override;
    PollStatus poll() override;
    void stop() override;

private:
    const Clock& clock_;
    VirtualCyclerOptions opts_;
    std::optional<SpecRef> spec_;
    std::size_t resume_ = 0;
    std::uint64_t started_ = 0;
    std::size_t last_reported_ = 0;
    bool done_ = false;
};

struct ChannelQueue {
    std::string channel;
    std::vector<SpecRef> specs;
};

enum class RunStatus { completed, failed };
std::string to_string(RunStatus s);
RunStatus run_status_from_string(const std::string& s);

struct RunSummary {
    std::string channel;
    std::string spec_id;
    std::size_t cycles = 0;
    std::uint64_t start_tick = 0;
    /// Tick the backend finished the last cycle.
    std::uint64_t finish_tick = 0;
    /// Tick the master received the summary.
    std::uint64_t end_tick = 0;
    RunStatus status = RunStatus::completed;

    nlohmann::json to_json() const;
    static RunSummary from_json(const nlohmann::json& j);
    bool operator==(const RunSummary&) const = default;
};

struct ChannelState {
    std::string channel;
    std::optional<std::string> current_spec;
    std::size_t cycles_completed = 0;
    std::uint64_t current_start = 0;
    std::vector<RunSummary> completed;
    bool failed = false;

    bool operator==(const ChannelState&) const = default;
};

struct Checkpoint {
    static constexpr int kVersion = 1;
    std::uint64_t written_tick = 0;
    std::vector<ChannelState> channels;

    nlohmann::json to_json() const;
    /// ValidationError with the reason on any schema problem.
    static Checkpoint from_json(const nlohmann::json& j);
    bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
/// RuntimeError naming the file and reason when missing, unparsable or
/// schema-invalid.
Checkpoint read_checkpoint(const std::filesystem::path& path);

struct CampaignOptions {
    std::uint64_t poll_interval = 1;
    std::filesystem::path checkpoint;  // empty: no persistence
    std::filesystem::path log;         // JSON lines; empty: none
    /// Re-run an interrupted spec from cycle 0 instead of resuming.
    bool restart_inflight = false;
    /// Test hook: simulate a crash after this many side-effecting steps.
    std::optional<std::size_t> crash_after_steps;
    /// Safety bound for the simulated loop.
    std::uint64_t max_ticks = 100'000'000;
};

struct CampaignResult {
    std::vector<RunSummary> log;
    Checkpoint final_state;
    std::uint64_t end_tick = 0;
    std::size_t steps = 0;
    bool crashed = false;
};

using BackendFactory = std::function<std::unique_ptr<CyclerBackend>(const std::string& channel)>;

/// Cooperative single-threaded campaign on a simulated clock.
/// `factory` builds one backend per channel; if null a VirtualCycler on `clock` is used.
CampaignResult run_campaign(const std::vector<ChannelQueue>& queues, SimClock& clock,
                            const CampaignOptions& opts, const BackendFactory& factory = {});

/// Resumes from `opts.checkpoint` when it exists, otherwise starts fresh.
/// The log file is rewritten from the checkpoint before continuing.
CampaignResult recover(const std::vector<ChannelQueue>& queues, SimClock& clock,
                       const CampaignOptions& opts, const BackendFactory& factory = {});

/// Threaded variant: one monitor thread per running spec, a master thread that
/// owns assignments, checkpoint and log. Ticks come from `clock`.
CampaignResult run_campaign_threaded(const std::vector<ChannelQueue>& queues, const WallClock& clock,
                                     const CampaignOptions& opts, const BackendFactory& factory = {},
                                     const std::optional<Checkpoint>& resume = std::nullopt);

/// One subdirectory per channel holding protocol JSON files, read in
/// lexicographic order. Spec id is the protocol id; cycles come from the spec.
std::vector<ChannelQueue> load_queues(const std::filesystem::path& dir);

std::vector<RunSummary> read_log(const std::filesystem::path& path);

/// Largest gap between one spec finishing and the next starting, per channel.
std::map<std::string, std::uint64_t> max_idle(const std::vector<RunSummary>& log);

} // namespace batdeg::scheduler
