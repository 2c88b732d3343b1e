// kernels.hpp - kernel mapping plans and runners: dense matmul, row-wise
// sparse matmul (unstructured and N:M structured), output-masked dense
// product (unstructured mask and sliding window), plus the affine
// mappability check for general loop nests.
#pragma once

#include <algorithm>
#include <memory>
#include <sstream>

#include "orchfab/fabric.hpp"
#include "orchfab/memsys.hpp"
#include "orchfab/programs.hpp"
#include "orchfab/workloads.hpp"

namespace orchfab {

// --- mask patterns -----------------------------------------------------------

struct MaskPattern {
    enum class Kind { Unstructured, Window, NM } kind = Kind::Unstructured;
    Mat mask;       // explicit bitmask (Unstructured)
    int width = 1;  // Window
    int seq = 1;
    int n = 1, m = 1;  // NM

    static MaskPattern unstructured(Mat m) {
        MaskPattern p;
        p.kind = Kind::Unstructured;
        p.mask = std::move(m);
        return p;
    }
    static MaskPattern window(int width, int seq) {
        if (width < 1 || width > seq) throw SimError(Err::DegenerateShape, "window width must be in 1..seq");
        MaskPattern p;
        p.kind = Kind::Window;
        p.width = width;
        p.seq = seq;
        return p;
    }
    static MaskPattern nm(int n, int m) {
        if (n < 1 || m < n) throw SimError(Err::DegenerateShape, "need 1 <= n <= m");
        MaskPattern p;
        p.kind = Kind::NM;
        p.n = n;
        p.m = m;
        return p;
    }
};

// --- affine mappability ------------------------------------------------------

// Access function for one array: per array dimension, a constant offset,
// temporal coefficients, and the two spatial coefficients (x and y of the
// array).
struct AccessFunction {
    struct Dim {
        int64_t c = 0;
        std::vector<int64_t> beta;
        std::array<int64_t, 2> alpha{0, 0};
    };
    std::vector<Dim> dims;
};

struct Mappability {
    bool ok = false;
    std::string witness;
};

// Mappable onto the mesh iff at most one spatial coefficient is nonzero and
// that coefficient is -1 or +1: neighbor links move data one hop per step
// along a single spatial direction.
inline Mappability check_affine_mappability(const AccessFunction& f) {
    std::vector<std::pair<std::pair<int, int>, int64_t>> nonzero;
    for (size_t k = 0; k < f.dims.size(); ++k)
        for (int j = 0; j < 2; ++j)
            if (f.dims[k].alpha[j] != 0)
                nonzero.push_back({{static_cast<int>(k), j}, f.dims[k].alpha[j]});
    Mappability r;
    if (nonzero.empty()) {
        r.ok = true;
        return r;
    }
    if (nonzero.size() > 1) {
        std::ostringstream w;
        w << "spatial coefficients";
        for (auto& [kj, a] : nonzero) w << " alpha[" << kj.first << "][" << kj.second << "]=" << a;
        w << " are simultaneously nonzero";
        r.witness = w.str();
        return r;
    }
    auto [kj, a] = nonzero[0];
    if (a != 1 && a != -1) {
        std::ostringstream w;
        w << "alpha[" << kj.first << "][" << kj.second << "]=" << a << " outside {-1,0,1}";
        r.witness = w.str();
        return r;
    }
    r.ok = true;
    return r;
}

// --- mapping plans -----------------------------------------------------------

enum class KernelKind { Gemm, Spmm, NmSpmm, Sddmm, WindowSddmm };

inline const char* kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Gemm: return "gemm";
        case KernelKind::Spmm: return "spmm";
        case KernelKind::NmSpmm: return "nm_spmm";
        case KernelKind::Sddmm: return "sddmm";
        case KernelKind::WindowSddmm: return "window_sddmm";
    }
    return "?";
}

// The plan records the three mapping ingredients: data provision (stream
// schedule per row and edge feeds), initial placement (which tile sits in
// which PE's memory), and control (the program instance driving each row).
struct MappingPlan {
    KernelKind kind = KernelKind::Spmm;
    int m = 0, k = 0, n = 0;
    int w_tile = 0;  // per-PE output-column tile width (row-flow kernels)
    int h_tile = 0;  // per-PE resident rows / output columns
    int k_pad = 0, n_pad = 0;
    int col_phases = 1;        // temporal passes over output-column tiles
    int chunks_per_set = 0;    // masked-product kernels
    std::string program_name;
    OrchConsts consts;
    std::vector<long long> row_start;  // stream start offset per fabric row
    bool padded = false;

    std::string describe() const {
        std::ostringstream o;
        o << "plan " << kernel_name(kind) << " m=" << m << " k=" << k << " n=" << n << "\n";
        o << "tiles w=" << w_tile << " h=" << h_tile << " k_pad=" << k_pad << " n_pad=" << n_pad
          << " col_phases=" << col_phases << (padded ? " (padded)" : "") << "\n";
        o << "control program=" << program_name << " c1=" << consts.c1 << " cap=" << consts.cap
          << " wc=" << consts.wc << " nflush=" << consts.nflush << "\n";
        o << "provision row_start=";
        for (size_t i = 0; i < row_start.size(); ++i) o << (i ? "," : "") << row_start[i];
        o << "\n";
        return o.str();
    }
};

inline Expected<MappingPlan> plan_spmm(int m, int k, int n, const FabricConfig& cfg,
                                       MaskPattern::Kind kind = MaskPattern::Kind::Unstructured,
                                       int nm_m = 1) {
    if (m <= 0 || k <= 0 || n <= 0) return Err::DegenerateShape;
    MappingPlan p;
    p.kind = kind == MaskPattern::Kind::NM ? KernelKind::NmSpmm : KernelKind::Spmm;
    p.m = m;
    p.k = k;
    p.n = n;
    int h = static_cast<int>(ceil_div(k, cfg.y_dim));
    if (kind == MaskPattern::Kind::NM && nm_m > 1) h = static_cast<int>(ceil_div(h, nm_m)) * nm_m;
    p.h_tile = h;
    p.k_pad = h * cfg.y_dim;
    int phase_cols = kSimdWidth * cfg.x_dim;
    p.col_phases = static_cast<int>(ceil_div(n, phase_cols));
    p.n_pad = p.col_phases * phase_cols;
    p.w_tile = p.n_pad / cfg.x_dim;
    p.padded = p.k_pad != k || p.n_pad != n;
    p.consts.c1 = h;
    p.consts.cap = cfg.spad_entries;
    p.row_start.assign(cfg.y_dim, 0);
    return p;
}

// --- run results -------------------------------------------------------------

struct RunOutput {
    Mat c;
    Metrics metrics;
    PacketStats packets;
    uint64_t staggered_violations = 0;
    double utilization = 0.0;
    double logical_utilization = 0.0;
    MappingPlan plan;
};

namespace detail {

inline void check_int8(const Mat& m, const char* what) {
    for (int32_t v : m.v)
        if (v < -128 || v > 127)
            throw SimError(Err::OperandShape, std::string(what) + " values must be INT8");
}

// Stream of one fabric row for the row-flow kernels: the nonzeros of the
// k-slice [y*h, (y+1)*h) in output-row-major order, one row-end per logical
// row. `dense` streams every position of the slice (the dense flow).
inline std::vector<StreamToken> row_flow_stream(const Mat& a, int y, int h, bool dense) {
    std::vector<StreamToken> s;
    int k_lo = y * h;
    int k_hi = std::min(a.cols, (y + 1) * h);
    for (int m = 0; m < a.rows; ++m) {
        for (int k = k_lo; k < k_hi; ++k) {
            if (dense || a.at(m, k) != 0)
                s.push_back(StreamToken{1, m, k, a.at(m, k)});  // tag 1 = NNZ
        }
        s.push_back(StreamToken{2, m, 0, 0});  // tag 2 = ROWEND
    }
    return s;
}

// Sanity for externally supplied streams: row-major order, one row-end per
// row, ascending column ids within a row.
inline void validate_row_stream(const std::vector<StreamToken>& s) {
    int64_t row = 0;
    int64_t last_cid = -1;
    for (const StreamToken& t : s) {
        if (t.tag == 1) {
            if (t.rid != row || t.cid <= last_cid)
                throw SimError(Err::MalformedStream, "nonzeros out of row-major order");
            last_cid = t.cid;
        } else if (t.tag == 2) {
            if (t.rid != row) throw SimError(Err::MalformedStream, "row-end for the wrong row");
            row++;
            last_cid = -1;
        } else {
            throw SimError(Err::MalformedStream, "unknown token tag");
        }
    }
}

inline void load_row_flow_dmem(Fabric& f, const Mat& b, const MappingPlan& p, int phase) {
    const FabricConfig& cfg = f.config();
    for (int y = 0; y < cfg.y_dim; ++y)
        for (int x = 0; x < cfg.x_dim; ++x) {
            std::vector<int8_t> img(static_cast<size_t>(p.h_tile) * kSimdWidth, 0);
            for (int h = 0; h < p.h_tile; ++h) {
                int k = y * p.h_tile + h;
                if (k >= b.rows) continue;
                for (int l = 0; l < kSimdWidth; ++l) {
                    int col = phase * kSimdWidth * cfg.x_dim + x * kSimdWidth + l;
                    if (col < b.cols) img[h * kSimdWidth + l] = static_cast<int8_t>(b.at(k, col));
                }
            }
            f.load_dmem(x, y, 0, img);
        }
}

inline void collect_row_flow_output(Fabric& f, Mat& c, const MappingPlan& p, int phase) {
    const FabricConfig& cfg = f.config();
    const auto& cols = f.south_collected();
    for (int x = 0; x < cfg.x_dim; ++x)
        for (const auto& [rid, vec] : cols[x]) {
            for (int l = 0; l < kSimdWidth; ++l) {
                int col = phase * kSimdWidth * cfg.x_dim + x * kSimdWidth + l;
                if (col < c.cols && rid < c.rows) c.at(static_cast<int>(rid), col) += vec.lane[l];
            }
        }
}

inline RunOutput run_row_flow(const Mat& a, const Mat& b, const FabricConfig& cfg,
                              const MappingPlan& plan, const FsmProgram& prog, bool dense_stream) {
    auto compiled = std::make_shared<CompiledProgram>();
    {
        auto c = CompiledProgram::compile(prog);
        if (!c) throw SimError(c.error(), "kernel program failed to assemble");
        *compiled = *c;
        auto bad = verify_equivalence(compiled->program, compiled->lut);
        if (!bad.empty())
            throw SimError(Err::IllegalTransition, "assembled program diverges from its rules");
    }

    RunOutput out;
    out.plan = plan;
    out.plan.program_name = prog.name;
    out.plan.consts = prog.consts;
    out.c = Mat(a.rows, b.cols);

    std::vector<std::vector<StreamToken>> streams(cfg.y_dim);
    for (int y = 0; y < cfg.y_dim; ++y) {
        streams[y] = row_flow_stream(a, y, plan.h_tile, dense_stream);
        validate_row_stream(streams[y]);
    }

    for (int phase = 0; phase < plan.col_phases; ++phase) {
        Fabric f(cfg);
        f.set_south_mode(SouthEdgeMode::PsumByRid);
        load_row_flow_dmem(f, b, plan, phase);
        for (int y = 0; y < cfg.y_dim; ++y) f.set_row_program(y, compiled, streams[y], plan.row_start[y]);
        f.run();
        collect_row_flow_output(f, out.c, plan, phase);
        Metrics pm = f.metrics();
        out.metrics += pm;
        out.staggered_violations += f.staggered_violations();
        out.packets.injected += f.packet_stats().injected;
        out.packets.absorbed += f.packet_stats().absorbed;
        out.packets.collected += f.packet_stats().collected;
    }
    if (out.staggered_violations != 0)
        throw SimError(Err::RouterConflict, "staggered-issue law violated");

    int64_t nnz = a.nnz();
    uint64_t sram = static_cast<uint64_t>(cfg.x_dim) * cfg.y_dim * cfg.dmem_bytes;
    auto sched = plan_tiles(a.rows, a.cols, b.cols, dense_stream ? a.rows * static_cast<int64_t>(a.cols) : nnz, sram);
    if (sched) {
        TrafficReport tr = offchip_traffic(sched.value(), 1);
        out.metrics.offchip_bytes = tr.total;
    }

    out.utilization = out.metrics.utilization();
    uint64_t logical_mults = static_cast<uint64_t>(dense_stream ? a.rows * static_cast<int64_t>(a.cols) : nnz) *
                             static_cast<uint64_t>(plan.n);
    out.logical_utilization =
        out.metrics.mult_lane_ops == 0
            ? 0.0
            : out.utilization * static_cast<double>(logical_mults) / static_cast<double>(out.metrics.mult_lane_ops);
    return out;
}

}  // namespace detail

// Row-wise sparse x dense product. Unstructured inputs run the buffered
// balancing program; N:M structured inputs run the direct flow with a flush
// every n elements and never touch the scratchpad.
inline RunOutput run_spmm(const Mat& a, const Mat& b, const FabricConfig& cfg,
                          const MaskPattern& pattern) {
    if (a.cols != b.rows) throw SimError(Err::ShapeMismatch, "inner dimensions differ");
    detail::check_int8(a, "A");
    detail::check_int8(b, "B");
    bool is_nm = pattern.kind == MaskPattern::Kind::NM;
    auto plan = plan_spmm(a.rows, a.cols, b.cols, cfg, pattern.kind, is_nm ? pattern.m : 1);
    if (!plan) throw SimError(plan.error(), "spmm plan failed");
    FsmProgram prog = is_nm ? programs::spmm_direct(plan.value().h_tile, pattern.n)
                            : programs::spmm_buffered(plan.value().h_tile, cfg.spad_entries);
    return detail::run_row_flow(a, b, cfg, plan.value(), prog, false);
}

// Dense matmul: the sparse path fed a fully dense stream of sequential
// column ids, flushing once per row. No scratchpad involvement.
inline RunOutput run_gemm(const Mat& a, const Mat& b, const FabricConfig& cfg) {
    if (a.cols != b.rows) throw SimError(Err::ShapeMismatch, "inner dimensions differ");
    detail::check_int8(a, "A");
    detail::check_int8(b, "B");
    auto plan = plan_spmm(a.rows, a.cols, b.cols, cfg);
    if (!plan) throw SimError(plan.error(), "gemm plan failed");
    plan.value().kind = KernelKind::Gemm;
    FsmProgram prog = programs::spmm_direct(plan.value().h_tile, plan.value().h_tile);
    return detail::run_row_flow(a, b, cfg, plan.value(), prog, true);
}

namespace detail {

struct SddmmPlanned {
    MappingPlan plan;
    std::vector<std::vector<StreamToken>> streams;     // per fabric row
    std::vector<std::vector<std::pair<int, int>>> emit;  // per row: (m, n) in emission order
};

// Masked-product schedule. Every output row m is one chunk set: W vectors of
// the streamed matrix enter from the top and ripple south; each masked
// position costs a W-MAC block plus the chain cycle. Rows pad to the row
// maximum so the chunk pipeline stays aligned without messages.
inline SddmmPlanned plan_sddmm_run(const Mat& mask_bits, int m_rows, int k, int n,
                                   const FabricConfig& cfg, bool window_tokens, int width) {
    SddmmPlanned sp;
    MappingPlan& p = sp.plan;
    p.kind = window_tokens ? KernelKind::WindowSddmm : KernelKind::Sddmm;
    p.m = m_rows;
    p.k = k;
    p.n = n;
    p.h_tile = static_cast<int>(ceil_div(n, cfg.y_dim));
    p.n_pad = p.h_tile * cfg.y_dim;
    int w = static_cast<int>(ceil_div(k, kSimdWidth * cfg.x_dim));
    if (w > cfg.spad_entries)
        throw SimError(Err::DegenerateShape, "k-slice needs more chunk slots than the scratchpad has");
    if (p.h_tile * w * kSimdWidth > cfg.dmem_bytes)
        throw SimError(Err::DegenerateShape, "stationary tile exceeds data memory");
    p.chunks_per_set = w;
    p.w_tile = w * kSimdWidth;
    p.k_pad = w * kSimdWidth * cfg.x_dim;
    p.padded = p.k_pad != k || p.n_pad != n;
    p.consts.wc = w;
    p.consts.cap = cfg.spad_entries;
    p.row_start.resize(cfg.y_dim);
    for (int y = 0; y < cfg.y_dim; ++y) p.row_start[y] = 3LL * y;

    sp.streams.assign(cfg.y_dim, {});
    sp.emit.assign(cfg.y_dim, {});
    int blk = w + 1;
    for (int m = 0; m < m_rows; ++m) {
        // per-row active cost, then pad to the maximum
        std::vector<std::vector<StreamToken>> hits(cfg.y_dim);
        std::vector<int> cost(cfg.y_dim, 0);
        for (int y = 0; y < cfg.y_dim; ++y) {
            if (window_tokens) {
                // contiguous band slice within this row's output columns
                int lo = std::max(0, m - width + 1), hi = m + 1;  // active n in [lo, hi)
                lo = std::max(lo, y * p.h_tile);
                hi = std::min({hi, (y + 1) * p.h_tile, n});
                if (hi > lo) {
                    hits[y].push_back(StreamToken{2, m, lo - y * p.h_tile, hi - lo});  // tag 2 = HIT
                    cost[y] = (hi - lo) * blk;
                    for (int nn = lo; nn < hi; ++nn) sp.emit[y].push_back({m, nn});
                }
            } else {
                for (int h = 0; h < p.h_tile; ++h) {
                    int nn = y * p.h_tile + h;
                    if (nn < n && mask_bits.at(m, nn) != 0) {
                        hits[y].push_back(StreamToken{2, m, h, 1});
                        cost[y] += blk;
                        sp.emit[y].push_back({m, nn});
                    }
                }
            }
        }
        int maxcost = 0;
        for (int y = 0; y < cfg.y_dim; ++y) maxcost = std::max(maxcost, cost[y]);
        for (int y = 0; y < cfg.y_dim; ++y) {
            for (int wi = 0; wi < w; ++wi) sp.streams[y].push_back(StreamToken{1, m, wi, 0});  // CHUNK
            for (auto& t : hits[y]) sp.streams[y].push_back(t);
            for (int padc = cost[y]; padc < maxcost; ++padc)
                sp.streams[y].push_back(StreamToken{3, m, 0, 0});  // PAD
            sp.streams[y].push_back(StreamToken{4, m, 0, 0});      // SETEND
        }
    }
    return sp;
}

inline RunOutput run_masked_product(const Mat& a, const Mat& b, const Mat& mask_or_empty,
                                    const FabricConfig& cfg, bool window_tokens, int width) {
    if (a.cols != b.rows) throw SimError(Err::ShapeMismatch, "inner dimensions differ");
    check_int8(a, "A");
    check_int8(b, "B");
    int m_rows = a.rows, k = a.cols, n = b.cols;
    if (!window_tokens && (mask_or_empty.rows != m_rows || mask_or_empty.cols != n))
        throw SimError(Err::ShapeMismatch, "mask shape must match the product");

    SddmmPlanned sp = plan_sddmm_run(mask_or_empty, m_rows, k, n, cfg, window_tokens, width);
    FsmProgram prog = programs::sddmm_block(sp.plan.chunks_per_set, cfg.spad_entries);
    auto compiled = std::make_shared<CompiledProgram>();
    {
        auto c = CompiledProgram::compile(prog);
        if (!c) throw SimError(c.error(), "kernel program failed to assemble");
        *compiled = *c;
        auto bad = verify_equivalence(compiled->program, compiled->lut);
        if (!bad.empty())
            throw SimError(Err::IllegalTransition, "assembled program diverges from its rules");
    }

    RunOutput out;
    out.plan = sp.plan;
    out.plan.program_name = prog.name;
    out.c = Mat(m_rows, n);

    Fabric f(cfg);
    f.set_south_mode(SouthEdgeMode::Discard);
    int w = sp.plan.chunks_per_set;
    // stationary tile: for each local output column h, the W k-chunks of B
    for (int y = 0; y < cfg.y_dim; ++y)
        for (int x = 0; x < cfg.x_dim; ++x) {
            std::vector<int8_t> img(static_cast<size_t>(sp.plan.h_tile) * w * kSimdWidth, 0);
            for (int h = 0; h < sp.plan.h_tile; ++h) {
                int nn = y * sp.plan.h_tile + h;
                if (nn >= n) continue;
                for (int wi = 0; wi < w; ++wi)
                    for (int l = 0; l < kSimdWidth; ++l) {
                        int kk = x * w * kSimdWidth + wi * kSimdWidth + l;
                        if (kk < k) img[(h * w + wi) * kSimdWidth + l] = static_cast<int8_t>(b.at(kk, nn));
                    }
            }
            f.load_dmem(x, y, 0, img);
        }
    // streamed matrix enters columnwise from the top edge
    for (int m = 0; m < m_rows; ++m)
        for (int x = 0; x < cfg.x_dim; ++x)
            for (int wi = 0; wi < w; ++wi) {
                VecWord vw;
                for (int l = 0; l < kSimdWidth; ++l) {
                    int kk = x * w * kSimdWidth + wi * kSimdWidth + l;
                    vw.lane[l] = kk < k ? a.at(m, kk) : 0;
                }
                f.feed_north(x, vw);
            }
    for (int y = 0; y < cfg.y_dim; ++y) f.set_row_program(y, compiled, sp.streams[y], sp.plan.row_start[y]);
    f.run();

    out.metrics = f.metrics();
    out.staggered_violations = f.staggered_violations();
    if (out.staggered_violations != 0)
        throw SimError(Err::RouterConflict, "staggered-issue law violated");

    for (int y = 0; y < cfg.y_dim; ++y) {
        const auto& vals = f.east_collected()[y];
        if (vals.size() != sp.emit[y].size())
            throw SimError(Err::MalformedStream, "masked outputs collected != planned");
        for (size_t i = 0; i < vals.size(); ++i) {
            auto [mm, nn] = sp.emit[y][i];
            out.c.at(mm, nn) = vals[i].lane[0];
        }
    }

    uint64_t nnz_mask = 0;
    for (int y = 0; y < cfg.y_dim; ++y) nnz_mask += sp.emit[y].size();
    out.metrics.offchip_bytes = static_cast<uint64_t>(m_rows) * k + static_cast<uint64_t>(k) * n +
                                nnz_mask * 4;
    out.utilization = out.metrics.utilization();
    uint64_t logical_mults = nnz_mask * static_cast<uint64_t>(k);
    out.logical_utilization =
        out.metrics.mult_lane_ops == 0
            ? 0.0
            : out.utilization * static_cast<double>(logical_mults) / static_cast<double>(out.metrics.mult_lane_ops);
    return out;
}

}  // namespace detail

// Output-masked dense product with an explicit bitmask.
inline RunOutput run_sddmm(const Mat& a, const Mat& b, const MaskPattern& mask,
                           const FabricConfig& cfg) {
    if (mask.kind == MaskPattern::Kind::Window)
        return detail::run_masked_product(a, b, Mat{}, cfg, true, mask.width);
    if (mask.kind != MaskPattern::Kind::Unstructured)
        throw SimError(Err::DegenerateShape, "masked product takes unstructured or window masks");
    return detail::run_masked_product(a, b, mask.mask, cfg, false, 0);
}

// Sliding-window variant: the banded mask decomposes into dense row
// segments, one multi-column token per (output row, fabric row).
inline RunOutput run_window_sddmm(const Mat& a, const Mat& b, int width, int seq_len,
                                  const FabricConfig& cfg) {
    if (a.rows != seq_len || b.cols != seq_len)
        throw SimError(Err::ShapeMismatch, "window product expects seq_len output rows and columns");
    if (width < 1 || width > seq_len)
        throw SimError(Err::DegenerateShape, "window width must be in 1..seq_len");
    return detail::run_masked_product(a, b, Mat{}, cfg, true, width);
}

}  // namespace orchfab
