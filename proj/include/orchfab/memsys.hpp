// memsys.hpp - dense-stationary tiling scheduler, off-chip traffic
// accounting, and the roofline-style bandwidth-bound runtime model.
//
// The dense matrix B stays on chip; when it does not fit, its rows are
// partitioned into resident phases and the sparse stream of A is replayed
// once per phase. Sparse stream cost: value byte(s) plus two coordinate
// bytes per nonzero, two bytes per row-end token.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orchfab/workloads.hpp"

namespace orchfab {

struct TilePhase {
    int k_begin = 0;  // first resident B row
    int k_rows = 0;   // resident B rows in this phase
    uint64_t bytes_in_b = 0;
    uint64_t bytes_in_a = 0;
    uint64_t bytes_out_c = 0;
};

struct TileSchedule {
    int m = 0, k = 0, n = 0;
    int64_t nnz_a = 0;
    uint64_t sram_bytes = 0;
    int rows_per_phase = 0;
    std::vector<TilePhase> phases;
};

enum class Bound { Compute, Bandwidth };

struct TrafficReport {
    uint64_t bytes_in_a = 0;
    uint64_t bytes_in_b = 0;
    uint64_t bytes_out_c = 0;
    uint64_t total = 0;
    uint64_t bandwidth_bound_cycles = 0;
    uint64_t compute_cycles = 0;
    Bound bound = Bound::Compute;
};

inline Expected<TileSchedule> plan_tiles(int m, int k, int n, int64_t nnz_a, uint64_t sram_bytes) {
    if (m <= 0 || k <= 0 || n <= 0) return Err::DegenerateShape;
    uint64_t b_row_bytes = static_cast<uint64_t>(n);
    if (sram_bytes < b_row_bytes) return Err::InfeasibleTiling;
    TileSchedule s;
    s.m = m;
    s.k = k;
    s.n = n;
    s.nnz_a = nnz_a;
    s.sram_bytes = sram_bytes;
    s.rows_per_phase = static_cast<int>(sram_bytes / b_row_bytes);
    for (int kb = 0; kb < k; kb += s.rows_per_phase) {
        TilePhase ph;
        ph.k_begin = kb;
        ph.k_rows = std::min(s.rows_per_phase, k - kb);
        s.phases.push_back(ph);
    }
    return s;
}

inline uint64_t sparse_stream_bytes(int64_t nnz, int rows, int element_bytes) {
    return static_cast<uint64_t>(nnz) * (static_cast<uint64_t>(element_bytes) + 2) +
           static_cast<uint64_t>(rows) * 2;
}

// Byte accounting over a schedule: B fetched once in total, the A stream
// replayed once per phase, C written once.
inline TrafficReport offchip_traffic(TileSchedule& s, int element_bytes = 1) {
    TrafficReport r;
    uint64_t a_stream = sparse_stream_bytes(s.nnz_a, s.m, element_bytes);
    for (size_t i = 0; i < s.phases.size(); ++i) {
        TilePhase& ph = s.phases[i];
        ph.bytes_in_b = static_cast<uint64_t>(ph.k_rows) * s.n * element_bytes;
        ph.bytes_in_a = a_stream;
        ph.bytes_out_c = i + 1 == s.phases.size()
                             ? static_cast<uint64_t>(s.m) * s.n * element_bytes
                             : 0;
        r.bytes_in_b += ph.bytes_in_b;
        r.bytes_in_a += ph.bytes_in_a;
        r.bytes_out_c += ph.bytes_out_c;
    }
    r.total = r.bytes_in_a + r.bytes_in_b + r.bytes_out_c;
    return r;
}

// cycles = max(compute, ceil(traffic/bw)); the binding side names the bound.
inline std::pair<uint64_t, Bound> bandwidth_bound_runtime(TrafficReport& r, uint64_t compute_cycles,
                                                          double bw_bytes_per_cycle) {
    if (bw_bytes_per_cycle <= 0) throw SimError(Err::DegenerateShape, "bandwidth must be positive");
    uint64_t bw_cycles =
        static_cast<uint64_t>((static_cast<double>(r.total) + bw_bytes_per_cycle - 1e-9) / bw_bytes_per_cycle);
    r.compute_cycles = compute_cycles;
    r.bandwidth_bound_cycles = bw_cycles;
    if (bw_cycles > compute_cycles) {
        r.bound = Bound::Bandwidth;
        return {bw_cycles, Bound::Bandwidth};
    }
    r.bound = Bound::Compute;
    return {compute_cycles, Bound::Compute};
}

// Replays a schedule against real matrices; phase-partitioned accumulation
// must reproduce the untiled product.
inline Mat replay_schedule(const TileSchedule& s, const Mat& a, const Mat& b) {
    Mat c(a.rows, b.cols);
    for (const TilePhase& ph : s.phases) {
        for (int i = 0; i < a.rows; ++i)
            for (int kk = ph.k_begin; kk < ph.k_begin + ph.k_rows; ++kk) {
                int32_t av = a.at(i, kk);
                if (av == 0) continue;
                for (int j = 0; j < b.cols; ++j) c.at(i, j) += av * b.at(kk, j);
            }
    }
    return c;
}

}  // namespace orchfab
