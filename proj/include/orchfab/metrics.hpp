// metrics.hpp - per-run counters aggregated across the fabric.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace orchfab {

struct Metrics {
    uint64_t cycles = 0;
    uint64_t active_lane_cycles = 0;  // vector-lane cycles spent on arithmetic ops
    uint64_t total_lane_cycles = 0;   // lanes x cycles
    uint64_t spad_reads = 0;
    uint64_t spad_writes = 0;
    uint64_t dmem_reads = 0;
    uint64_t dmem_writes = 0;
    uint64_t noc_transfers = 0;
    uint64_t fsm_transitions = 0;
    uint64_t offchip_bytes = 0;
    uint64_t mult_lane_ops = 0;  // scalar multiplies, for work-conservation checks

    double utilization() const {
        return total_lane_cycles == 0 ? 0.0
                                      : static_cast<double>(active_lane_cycles) / static_cast<double>(total_lane_cycles);
    }

    Metrics& operator+=(const Metrics& o) {
        cycles += o.cycles;
        active_lane_cycles += o.active_lane_cycles;
        total_lane_cycles += o.total_lane_cycles;
        spad_reads += o.spad_reads;
        spad_writes += o.spad_writes;
        dmem_reads += o.dmem_reads;
        dmem_writes += o.dmem_writes;
        noc_transfers += o.noc_transfers;
        fsm_transitions += o.fsm_transitions;
        offchip_bytes += o.offchip_bytes;
        mult_lane_ops += o.mult_lane_ops;
        return *this;
    }

    static const std::vector<std::string>& field_names() {
        static const std::vector<std::string> names = {
            "cycles",      "active_lane_cycles", "total_lane_cycles", "spad_reads",
            "spad_writes", "dmem_reads",         "dmem_writes",       "noc_transfers",
            "fsm_transitions", "offchip_bytes",  "mult_lane_ops"};
        return names;
    }

    std::vector<uint64_t> field_values() const {
        return {cycles,      active_lane_cycles, total_lane_cycles, spad_reads, spad_writes,
                dmem_reads,  dmem_writes,        noc_transfers,     fsm_transitions,
                offchip_bytes, mult_lane_ops};
    }
};

}  // namespace orchfab
