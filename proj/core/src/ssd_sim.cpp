#include <algorithm>
#include <cstdint>
#include <deque>
#include <queue>
#include <vector>

#include "slim/error.hpp"
#include "slim/ssd.hpp"

namespace slim::ssd {

namespace {

enum class Kind : std::uint8_t { kDieReady, kBroadcastDone, kReadDone, kXferDone, kComputeDone };

struct Event {
    double t;
    std::uint64_t seq;
    Kind kind;
    std::uint32_t id;
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
};

constexpr int kBuffers = 2;

struct DieState {
    const ReadTransaction* txn = nullptr;
    std::size_t next = 0;
    bool ready = false;
    bool reading = false;
    int slots = 0;  // page registers (channel level) or PE buffers (die level)
};

struct PeState {
    std::deque<std::uint32_t> queue;  // useful bytes of pages waiting for compute
    std::deque<std::uint32_t> owner;  // die that supplied each queued page
    bool busy = false;
    int buffers = 0;
    bool used = false;
};

struct ChannelState {
    std::deque<std::uint32_t> fifo;  // dies with a page waiting for the bus
    bool busy = false;
    std::uint32_t in_flight_die = 0;
    std::uint32_t in_flight_useful = 0;
};

class PassSim {
public:
    PassSim(std::span<const ReadTransaction> txns, const NandTiming& timing, const SsdGeometry& geo,
            const FfnPassParams& params, TraceSink* sink)
        : timing_(timing), geo_(geo), params_(params), sink_(sink),
          die_level_(timing.pe_level == PeLevel::kDie), dies_(geo.n_dies()),
          pes_(die_level_ ? geo.n_dies() : geo.n_ch), chans_(geo.n_ch) {
        for (const auto& t : txns) {
            if (t.die >= dies_.size()) {
                throw MappingError("simulate_ffn_pass: die index outside geometry");
            }
            if (dies_[t.die].txn) {
                throw MappingError("simulate_ffn_pass: two transactions for one die");
            }
            dies_[t.die].txn = &t;
        }
        txns_ = txns;
        pending_useful_.resize(dies_.size());
        read_ns_ = (die_level_ && timing.die_bw_gbps > 0) ? geo.page_bytes / timing.die_bw_gbps
                                                          : timing.t_r_us * 1e3;
        xfer_ns_ = geo.page_bytes / (timing.ch_bus_mbps * 1e-3);
        mac_rate_ = timing.pe_macs * timing.pe_clock_ghz;  // MACs per ns
    }

    FfnPassResult run() {
        const std::uint64_t in_bytes =
            std::uint64_t{params_.dim_e} * params_.bytes_per_elem * params_.batch_tokens;
        // Step 1: one broadcast per channel bus (die level) or over the on-chip bus.
        const double bcast_ns = die_level_ ? in_bytes / (timing_.ch_bus_mbps * 1e-3)
                                           : in_bytes / timing_.onchip_bus_gbps;
        if (die_level_) {
            for (std::uint32_t c = 0; c < geo_.n_ch; ++c) {
                emit(0.0, "ch", c, ev::kChXfer, in_bytes, 0);
            }
        } else {
            emit(0.0, "ctrl", 0, ev::kOnchipXfer, in_bytes, 0);
        }
        push(bcast_ns, Kind::kBroadcastDone, 0);

        // Step 2: the controller translates one transaction at a time.
        double ftl_ns = 0.0;
        for (const auto& t : txns_) {
            ftl_ns += timing_.ftl_us * 1e3;
            emit(ftl_ns, "ctrl", 0, ev::kFtl, 0, t.pages.size());
            push(ftl_ns, Kind::kDieReady, t.die);
        }

        while (!queue_.empty()) {
            const Event e = queue_.top();
            queue_.pop();
            now_ = e.t;
            dispatch(e);
        }

        // Step 4: partial sums back over the channel bus or the on-chip bus.
        const std::uint64_t psum =
            std::uint64_t{params_.dim_e} * timing_.psum_bytes * params_.batch_tokens;
        double reduce_ns = 0.0;
        if (die_level_) {
            std::vector<std::uint32_t> per_ch(geo_.n_ch, 0);
            for (std::uint32_t d = 0; d < pes_.size(); ++d) {
                if (pes_[d].used) ++per_ch[d % geo_.n_ch];
            }
            for (std::uint32_t c = 0; c < geo_.n_ch; ++c) {
                if (per_ch[c] == 0) continue;
                reduce_ns = std::max(reduce_ns, per_ch[c] * psum / (timing_.ch_bus_mbps * 1e-3));
                emit(last_compute_, "ch", c, ev::kChXfer, per_ch[c] * psum, 0);
            }
        } else {
            std::uint32_t active = 0;
            for (const auto& p : pes_) active += p.used ? 1 : 0;
            reduce_ns = active * psum / timing_.onchip_bus_gbps;
            if (active) emit(last_compute_, "ctrl", 0, ev::kOnchipXfer, active * psum, 0);
        }

        FfnPassResult r;
        const double end_ns = std::max(last_compute_, bcast_ns) + reduce_ns;
        emit(end_ns, "ctrl", 0, ev::kPassEnd, 0, 0);
        r.latency_s = end_ns * 1e-9;
        r.stream_s = last_compute_ * 1e-9;
        r.broadcast_s = bcast_ns * 1e-9;
        r.reduce_s = reduce_ns * 1e-9;
        for (const auto& t : txns_) {
            r.raw_bytes += t.total_bytes;
            r.useful_bytes += t.useful_bytes;
            r.pages += t.pages.size();
        }
        r.macs = macs_;
        return r;
    }

private:
    void push(double t, Kind k, std::uint32_t id) { queue_.push({t, seq_++, k, id}); }

    void emit(double t, std::string_view kind, std::uint32_t idx, std::string_view event,
              std::uint64_t bytes, std::uint64_t ops) {
        if (sink_) sink_->record({params_.start_ns + t, kind, idx, event, bytes, ops});
    }

    std::uint32_t channel_of(std::uint32_t die) const { return die % geo_.n_ch; }

    void dispatch(const Event& e) {
        switch (e.kind) {
            case Kind::kDieReady:
                dies_[e.id].ready = true;
                try_read(e.id);
                break;
            case Kind::kBroadcastDone:
                broadcast_done_ = true;
                for (std::uint32_t p = 0; p < pes_.size(); ++p) try_compute(p);
                break;
            case Kind::kReadDone: on_read_done(e.id); break;
            case Kind::kXferDone: on_xfer_done(e.id); break;
            case Kind::kComputeDone: on_compute_done(e.id); break;
        }
    }

    void try_read(std::uint32_t d) {
        DieState& s = dies_[d];
        if (!s.ready || s.reading || s.slots >= kBuffers || !s.txn ||
            s.next >= s.txn->pages.size()) {
            return;
        }
        s.reading = true;
        ++s.slots;
        emit(now_, "die", d, ev::kNandRead, geo_.page_bytes, 0);
        push(now_ + read_ns_, Kind::kReadDone, d);
    }

    void on_read_done(std::uint32_t d) {
        DieState& s = dies_[d];
        s.reading = false;
        const std::uint32_t useful = s.txn->page_useful[s.next++];
        if (die_level_) {
            PeState& pe = pes_[d];
            pe.queue.push_back(useful);
            pe.owner.push_back(d);
            try_compute(d);
        } else {
            pending_useful_[d].push_back(useful);
            chans_[channel_of(d)].fifo.push_back(d);
            try_xfer(channel_of(d));
        }
        try_read(d);
    }

    void try_xfer(std::uint32_t c) {
        ChannelState& ch = chans_[c];
        PeState& pe = pes_[c];
        if (ch.busy || ch.fifo.empty() || pe.buffers >= kBuffers) return;
        const std::uint32_t d = ch.fifo.front();
        ch.fifo.pop_front();
        ch.busy = true;
        ch.in_flight_die = d;
        ch.in_flight_useful = pending_useful_[d].front();
        pending_useful_[d].pop_front();
        ++pe.buffers;
        emit(now_, "ch", c, ev::kChXfer, geo_.page_bytes, 0);
        push(now_ + xfer_ns_, Kind::kXferDone, c);
    }

    void on_xfer_done(std::uint32_t c) {
        ChannelState& ch = chans_[c];
        ch.busy = false;
        --dies_[ch.in_flight_die].slots;
        pes_[c].queue.push_back(ch.in_flight_useful);
        pes_[c].owner.push_back(ch.in_flight_die);
        try_compute(c);
        try_read(ch.in_flight_die);
        try_xfer(c);
    }

    void try_compute(std::uint32_t p) {
        PeState& pe = pes_[p];
        if (!broadcast_done_ || pe.busy || pe.queue.empty()) return;
        const std::uint64_t macs =
            std::uint64_t{pe.queue.front()} / params_.bytes_per_elem * params_.batch_tokens;
        pe.queue.pop_front();
        pe.busy = true;
        pe.used = true;
        macs_ += macs;
        emit(now_, "pe", p, die_level_ ? ev::kPeMacDie : ev::kPeMacCh, 0, macs);
        push(now_ + macs / mac_rate_, Kind::kComputeDone, p);
    }

    void on_compute_done(std::uint32_t p) {
        PeState& pe = pes_[p];
        pe.busy = false;
        const std::uint32_t owner = pe.owner.front();
        pe.owner.pop_front();
        last_compute_ = std::max(last_compute_, now_);
        if (die_level_) {
            --dies_[owner].slots;
            try_read(owner);
        } else {
            --pe.buffers;
            try_xfer(p);
        }
        try_compute(p);
    }

    const NandTiming& timing_;
    const SsdGeometry& geo_;
    FfnPassParams params_;
    TraceSink* sink_;
    bool die_level_;
    std::span<const ReadTransaction> txns_;

    std::vector<DieState> dies_;
    std::vector<PeState> pes_;
    std::vector<ChannelState> chans_;
    std::vector<std::deque<std::uint32_t>> pending_useful_;  // read, not yet on the bus

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    double read_ns_ = 0.0;
    double xfer_ns_ = 0.0;
    double mac_rate_ = 1.0;
    double last_compute_ = 0.0;
    bool broadcast_done_ = false;
    std::uint64_t macs_ = 0;
};

}  // namespace

FfnPassResult simulate_ffn_pass(std::span<const ReadTransaction> txns, const NandTiming& timing,
                                const SsdGeometry& geo, const FfnPassParams& params,
                                TraceSink* sink) {
    geo.validate();
    timing.validate();
    if (params.dim_e == 0 || params.batch_tokens == 0 || params.bytes_per_elem == 0) {
        throw ConfigError("simulate_ffn_pass: dim_e, batch and element size must be >= 1");
    }
    return PassSim(txns, timing, geo, params, sink).run();
}

}  // namespace slim::ssd
