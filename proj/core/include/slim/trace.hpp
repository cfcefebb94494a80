#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace slim {

// Event names used by the simulators. Views point at string literals.
namespace ev {
inline constexpr std::string_view kNandRead = "nand_read";
inline constexpr std::string_view kChXfer = "ch_xfer";
inline constexpr std::string_view kOnchipXfer = "onchip_xfer";
inline constexpr std::string_view kPeMacDie = "pe_mac_die";
inline constexpr std::string_view kPeMacCh = "pe_mac_ch";
inline constexpr std::string_view kFtl = "ftl";
inline constexpr std::string_view kPimAap = "pim_aap";
inline constexpr std::string_view kNearBank = "near_bank";
inline constexpr std::string_view kDramRw = "dram_rw";
inline constexpr std::string_view kPcie = "pcie";
inline constexpr std::string_view kHostBusy = "host_busy";
inline constexpr std::string_view kPassEnd = "pass_end";
}  // namespace ev

struct TraceEvent {
    double time_ns = 0.0;
    std::string_view unit_kind;  // "die", "ch", "pe", "ctrl", "dram", "host"
    std::uint32_t unit_index = 0;
    std::string_view event;
    std::uint64_t bytes = 0;
    std::uint64_t ops = 0;  // MACs, bank-AAPs, bank-cycles or busy ns

    std::string unit() const;
};

class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void record(const TraceEvent& e) = 0;
};

class VectorSink : public TraceSink {
public:
    void record(const TraceEvent& e) override { events_.push_back(e); }
    const std::vector<TraceEvent>& events() const noexcept { return events_; }

private:
    std::vector<TraceEvent> events_;
};

// One JSON object per line: {"time_ns":..,"unit":"die.3","event":"nand_read","bytes":..,"ops":..}
class JsonlSink : public TraceSink {
public:
    explicit JsonlSink(std::ostream& out) : out_(out) {}
    void record(const TraceEvent& e) override;

private:
    std::ostream& out_;
};

struct EventTotals {
    std::uint64_t count = 0;
    std::uint64_t bytes = 0;
    std::uint64_t ops = 0;
};

// Integer totals per event name. Order-independent, so any replay of the
// same events yields identical totals.
class TotalsSink : public TraceSink {
public:
    void record(const TraceEvent& e) override;
    void merge(const TotalsSink& other);
    const std::map<std::string, EventTotals, std::less<>>& totals() const noexcept {
        return totals_;
    }
    EventTotals get(std::string_view event) const;

private:
    std::map<std::string, EventTotals, std::less<>> totals_;
};

// Forwards every event to two sinks.
class TeeSink : public TraceSink {
public:
    TeeSink(TraceSink* a, TraceSink* b) : a_(a), b_(b) {}
    void record(const TraceEvent& e) override {
        if (a_) a_->record(e);
        if (b_) b_->record(e);
    }

private:
    TraceSink* a_;
    TraceSink* b_;
};

}  // namespace slim
