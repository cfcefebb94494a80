#include "slim/trace.hpp"

#include <cstdio>
#include <ostream>

namespace slim {

std::string TraceEvent::unit() const {
    std::string s(unit_kind);
    s += '.';
    s += std::to_string(unit_index);
    return s;
}

void JsonlSink::record(const TraceEvent& e) {
    char t[40];
    std::snprintf(t, sizeof(t), "%.3f", e.time_ns);
    out_ << "{\"time_ns\":" << t << ",\"unit\":\"" << e.unit() << "\",\"event\":\"" << e.event
         << "\",\"bytes\":" << e.bytes << ",\"ops\":" << e.ops << "}\n";
}

void TotalsSink::record(const TraceEvent& e) {
    auto it = totals_.find(e.event);
    if (it == totals_.end()) it = totals_.emplace(std::string(e.event), EventTotals{}).first;
    it->second.count += 1;
    it->second.bytes += e.bytes;
    it->second.ops += e.ops;
}

void TotalsSink::merge(const TotalsSink& other) {
    for (const auto& [name, t] : other.totals_) {
        auto& dst = totals_[name];
        dst.count += t.count;
        dst.bytes += t.bytes;
        dst.ops += t.ops;
    }
}

EventTotals TotalsSink::get(std::string_view event) const {
    auto it = totals_.find(event);
    return it == totals_.end() ? EventTotals{} : it->second;
}

}  // namespace slim
