// pe.hpp - one processing element: the 3-stage LOAD/COMPUTE/COMMIT pipeline,
// the 4-wide INT8 vector lane with 32-bit accumulators, local data memory, and
// the FIFO-managed scratchpad.
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>

#include "orchfab/isa.hpp"

namespace orchfab {

// 4-lane word. Inputs are INT8-range values; accumulation is exact 32-bit
// two's complement (no saturation).
struct VecWord {
    std::array<int32_t, kSimdWidth> lane{0, 0, 0, 0};

    bool operator==(const VecWord&) const = default;

    static VecWord broadcast(int32_t v) { return VecWord{{v, v, v, v}}; }
    static VecWord zero() { return VecWord{}; }

    int64_t sum() const {
        int64_t s = 0;
        for (int32_t l : lane) s += l;
        return s;
    }
};

struct AluOut {
    VecWord v;
    bool scalar = false;  // result is a lane-0 scalar (VSUM)
};

// Pure lane arithmetic. `a_scalar` marks op1 as the scalar source (SVMAC).
inline Expected<AluOut> vector_alu(Opcode op, const VecWord& a, bool a_scalar, const VecWord& b,
                                   const VecWord& acc) {
    AluOut out;
    switch (op) {
        case Opcode::SVMAC: {
            if (!a_scalar) return Err::OperandShape;
            int32_t s = a.lane[0];
            for (int i = 0; i < kSimdWidth; ++i) out.v.lane[i] = acc.lane[i] + s * b.lane[i];
            return out;
        }
        case Opcode::VVMAC:
            if (a_scalar) return Err::OperandShape;
            for (int i = 0; i < kSimdWidth; ++i) out.v.lane[i] = acc.lane[i] + a.lane[i] * b.lane[i];
            return out;
        case Opcode::VVADD:
            for (int i = 0; i < kSimdWidth; ++i) out.v.lane[i] = a.lane[i] + b.lane[i];
            return out;
        case Opcode::VSUM:
            out.v.lane[0] = static_cast<int32_t>(a.sum());
            out.scalar = true;
            return out;
        case Opcode::NOP:
        case Opcode::MOV:
        case Opcode::HOLD:
            out.v = a;
            return out;
    }
    return Err::OperandShape;
}

// Values driven onto a PE's input ports in one cycle, at most one per
// direction.
struct PortFrame {
    std::array<std::optional<VecWord>, 4> val;

    std::optional<VecWord>& at(Dir d) { return val[static_cast<int>(d)]; }
    const std::optional<VecWord>& at(Dir d) const { return val[static_cast<int>(d)]; }
    bool any() const {
        for (const auto& v : val)
            if (v) return true;
        return false;
    }
};

// FIFO context metadata for the scratchpad: the window of row ids this PE
// currently manages starts at rid_start and spans len entries from slot head.
struct SpadMeta {
    int64_t rid_start = 0;
    int head = 0;
    int len = 0;
};

struct PeCounters {
    uint64_t dmem_reads = 0, dmem_writes = 0;
    uint64_t spad_reads = 0, spad_writes = 0;
    uint64_t active_cycles = 0;   // cycles the lane ran an arithmetic op
    uint64_t busy_cycles = 0;     // cycles any non-NOP instruction was in COMPUTE
    uint64_t mult_lane_ops = 0;   // scalar multiplies performed
};

struct StageLatch {
    Instruction inst = Instruction::nop();
    bool busy = false;
    VecWord a, b, acc;
    bool a_scalar = false;
    std::optional<VecWord> bypass_val;
    AluOut result;
    bool config_phase = false;  // spatial configuration: commits suppressed
};

struct PeTickOut {
    PortFrame out;                      // values this PE drives this cycle
    std::optional<Instruction> forward; // instruction leaving COMMIT, bound for the east neighbor
    bool bypass_driven = false;
};

class PeState {
public:
    PeState() { dmem.fill(0); }

    int x = 0, y = 0;
    bool last_col = false;      // enables the reduce-at-last-column fold
    bool relaxed_ports = false; // spatial mode: missing port values read as zero
    int spad_cap = kSpadEntries;

    std::array<int8_t, kDmemBytes> dmem{};
    std::array<VecWord, kSpadEntries> spad{};
    SpadMeta spad_meta;
    std::array<VecWord, 4> vregs{};
    PeCounters counters;

    // Held instruction for spatial execution (latched during configuration).
    Instruction held = Instruction::nop();
    bool hold_active = false;

    // --- scratchpad FIFO interface -----------------------------------------

    bool spad_is_managing(int64_t rid) const {
        return rid >= spad_meta.rid_start && rid < spad_meta.rid_start + spad_meta.len;
    }

    // Slot of a managed row id.
    Expected<int> spad_index_of(int64_t rid) const {
        if (!spad_is_managing(rid)) return Err::BufferEmpty;
        return static_cast<int>((spad_meta.head + (rid - spad_meta.rid_start)) % spad_cap);
    }

    Expected<bool> spad_push(const VecWord& v) {
        if (spad_meta.len >= spad_cap) return Err::BufferFull;
        int slot = (spad_meta.head + spad_meta.len) % spad_cap;
        spad[slot] = v;
        spad_meta.len++;
        return true;
    }

    // Pops the entry for rid_start, zeroing the vacated slot so the row that
    // reuses it later accumulates from zero.
    Expected<VecWord> spad_pop() {
        if (spad_meta.len == 0) return Err::BufferEmpty;
        VecWord v = spad[spad_meta.head];
        spad[spad_meta.head] = VecWord::zero();
        spad_meta.head = (spad_meta.head + 1) % spad_cap;
        spad_meta.rid_start++;
        spad_meta.len--;
        return v;
    }

    Expected<VecWord> spad_peek() const {
        if (spad_meta.len == 0) return Err::BufferEmpty;
        return spad[spad_meta.head];
    }

    // --- pipeline ----------------------------------------------------------

    bool pipeline_empty() const { return !compute_.busy && !commit_.busy; }

    // True while any in-flight latch holds real work (not a plain NOP).
    bool pipeline_working() const {
        auto w = [](const StageLatch& l) { return l.busy && (l.inst.op != Opcode::NOP || l.inst.flags); };
        return w(compute_) || w(commit_);
    }

    // Advance one cycle. The instruction accepted now performs LOAD in this
    // cycle; the one accepted last cycle computes; the one from two cycles ago
    // commits and is returned for forwarding to the east neighbor.
    PeTickOut pe_tick(const Instruction& incoming, const PortFrame& ports, long long cycle = -1,
                      bool config_phase = false) {
        PeTickOut out;

        // COMMIT (accepted at cycle-2)
        if (commit_.busy) {
            if (!commit_.config_phase) commit_stage(commit_, out, cycle);
            out.forward = commit_.inst;
        }

        // COMPUTE (accepted at cycle-1)
        if (compute_.busy && !compute_.config_phase) compute_stage(compute_, cycle);

        // LOAD (accepted now). Configuration-phase instructions only flow and
        // latch; they neither read operands nor commit results.
        StageLatch fresh;
        if (incoming.valid) {
            bool does_work = incoming.op != Opcode::NOP || incoming.flags != 0;
            fresh.inst = incoming;
            fresh.busy = true;
            fresh.config_phase = config_phase;
            if (config_phase) {
                if (does_work) {
                    held = incoming;
                    hold_active = true;
                }
            } else if (does_work) {
                load_stage(fresh, ports, cycle);
            }
        }

        commit_ = compute_;
        compute_ = fresh;
        return out;
    }

private:
    StageLatch compute_, commit_;  // in-flight latches behind the LOAD stage

    struct PendingWrite {
        bool valid = false;
        RegionKind kind = RegionKind::Null;
        uint16_t offset = 0;
        VecWord value;
    };

    static PendingWrite pending_of(const StageLatch& l) {
        PendingWrite p;
        if (!l.busy || l.config_phase) return p;
        Opcode op = l.inst.op;
        if (op == Opcode::NOP || op == Opcode::HOLD) return p;
        Region rr = decode_address(l.inst.res);
        p.valid = true;
        p.kind = rr.kind;
        p.offset = rr.offset;
        p.value = l.result.v;
        return p;
    }

    VecWord read_dmem_vec(uint16_t addr, long long cycle) {
        if (addr + kSimdWidth > kDmemBytes)
            throw SimError(Err::InvalidAddress, "dmem read past end", cycle, x, y);
        VecWord v;
        for (int i = 0; i < kSimdWidth; ++i) v.lane[i] = dmem[addr + i];
        counters.dmem_reads++;
        return v;
    }

    VecWord read_spad_vec(uint16_t addr, long long cycle) {
        if (addr % 4 != 0 || addr / 4 >= kSpadEntries)
            throw SimError(Err::InvalidAddress, "spad address must be a 4-aligned slot", cycle, x, y);
        counters.spad_reads++;
        return spad[addr / 4];
    }

    // Reads an operand at LOAD. The write of the instruction one cycle ahead
    // in the pipeline has not reached memory yet, so reads forward from it;
    // this keeps back-to-back accumulation chains sequentially consistent.
    VecWord read_source(Region r, int32_t imm, const PortFrame& ports, long long cycle,
                        bool* scalar_out = nullptr) {
        PendingWrite fwd = pending_of(compute_);  // predecessor, computed earlier this tick
        switch (r.kind) {
            case RegionKind::Null:
                return VecWord::zero();
            case RegionKind::Immediate:
                if (scalar_out) *scalar_out = true;
                return VecWord::broadcast(imm);
            case RegionKind::VReg: {
                VecWord v = vregs[r.offset];
                if (fwd.valid && fwd.kind == RegionKind::VReg && fwd.offset == r.offset) v = fwd.value;
                return v;
            }
            case RegionKind::DataMemory: {
                VecWord v = read_dmem_vec(r.offset, cycle);
                if (fwd.valid && fwd.kind == RegionKind::DataMemory && fwd.offset == r.offset) v = fwd.value;
                return v;
            }
            case RegionKind::Scratchpad: {
                VecWord v = read_spad_vec(r.offset, cycle);
                if (fwd.valid && fwd.kind == RegionKind::Scratchpad && fwd.offset == r.offset) v = fwd.value;
                return v;
            }
            case RegionKind::RouterPort: {
                const auto& pv = ports.at(static_cast<Dir>(r.offset));
                if (!pv) {
                    if (relaxed_ports) return VecWord::zero();
                    throw SimError(Err::RendezvousViolation,
                                   std::string("load from undriven port ") + dir_name(static_cast<Dir>(r.offset)),
                                   cycle, x, y);
                }
                return *pv;
            }
            default:
                throw SimError(Err::InvalidAddress, "unreadable operand region", cycle, x, y);
        }
    }

    void load_stage(StageLatch& l, const PortFrame& ports, long long cycle) {
        const Instruction& in = l.inst;
        Region r1 = decode_address(in.op1);
        Region r2 = decode_address(in.op2);
        Region rr = decode_address(in.res);

        if (in.op != Opcode::NOP && in.op != Opcode::HOLD) {
            l.a = read_source(r1, in.imm, ports, cycle, &l.a_scalar);
            if (in.op == Opcode::SVMAC || in.op == Opcode::VVMAC || in.op == Opcode::VVADD)
                l.b = read_source(r2, in.imm, ports, cycle);
            // Accumulating ops read their destination's current value unless
            // the rule asked for a fresh accumulator.
            if ((in.op == Opcode::SVMAC || in.op == Opcode::VVMAC) && !(in.flags & kFlagAccInit)) {
                if (rr.kind == RegionKind::VReg || rr.kind == RegionKind::DataMemory ||
                    rr.kind == RegionKind::Scratchpad)
                    l.acc = read_source(rr, 0, ports, cycle);
            }
        }

        if (in.flags & kFlagBypassNS) {
            const auto& pv = ports.at(Dir::N);
            if (!pv) {
                if (relaxed_ports)
                    l.bypass_val = VecWord::zero();
                else
                    throw SimError(Err::RendezvousViolation, "bypass with undriven north port", cycle, x, y);
            } else {
                l.bypass_val = *pv;
            }
        }

        // FIFO pop rides the flush: the head slot was read as op1; clear it
        // and advance the window.
        if (in.flags & kFlagSpadPop) {
            if (spad_meta.len == 0)
                throw SimError(Err::BufferEmpty, "pop on empty scratchpad", cycle, x, y);
            spad[spad_meta.head] = VecWord::zero();
            spad_meta.head = (spad_meta.head + 1) % spad_cap;
            spad_meta.rid_start++;
            spad_meta.len--;
        }
    }

    void compute_stage(StageLatch& l, long long cycle) {
        const Instruction& in = l.inst;
        if (in.op == Opcode::NOP || in.op == Opcode::HOLD) return;
        auto r = vector_alu(in.op, l.a, l.a_scalar, l.b, l.acc);
        if (!r) throw SimError(r.error(), "alu operand shape", cycle, x, y);
        l.result = *r;
        if ((in.flags & kFlagReduceLast) && last_col) {
            VecWord folded;
            folded.lane[0] = static_cast<int32_t>(l.result.v.sum());
            l.result.v = folded;
            l.result.scalar = true;
        }
        counters.busy_cycles++;
        if (in.op == Opcode::SVMAC || in.op == Opcode::VVMAC || in.op == Opcode::VVADD ||
            in.op == Opcode::VSUM)
            counters.active_cycles++;
        if (in.op == Opcode::SVMAC || in.op == Opcode::VVMAC) counters.mult_lane_ops += kSimdWidth;
    }

    void extend_window_to_slot(int slot, long long cycle) {
        int dist = (slot - spad_meta.head % spad_cap + spad_cap) % spad_cap;
        if (dist >= spad_meta.len) {
            if (dist + 1 > spad_cap)
                throw SimError(Err::BufferFull, "write beyond scratchpad window capacity", cycle, x, y);
            spad_meta.len = dist + 1;
        }
    }

    void commit_stage(StageLatch& l, PeTickOut& out, long long cycle) {
        const Instruction& in = l.inst;
        if (in.op != Opcode::NOP && in.op != Opcode::HOLD) {
            Region rr = decode_address(in.res);
            switch (rr.kind) {
                case RegionKind::Null:
                    break;
                case RegionKind::VReg:
                    vregs[rr.offset] = l.result.v;
                    break;
                case RegionKind::DataMemory: {
                    if (rr.offset + kSimdWidth > kDmemBytes)
                        throw SimError(Err::InvalidAddress, "dmem write past end", cycle, x, y);
                    for (int i = 0; i < kSimdWidth; ++i)
                        dmem[rr.offset + i] = static_cast<int8_t>(l.result.v.lane[i]);
                    counters.dmem_writes++;
                    break;
                }
                case RegionKind::Scratchpad: {
                    if (rr.offset % 4 != 0 || rr.offset / 4 >= kSpadEntries)
                        throw SimError(Err::InvalidAddress, "spad write must target a 4-aligned slot", cycle, x, y);
                    int slot = rr.offset / 4;
                    if (slot < spad_cap) extend_window_to_slot(slot, cycle);
                    spad[slot] = l.result.v;
                    counters.spad_writes++;
                    break;
                }
                case RegionKind::RouterPort:
                    out.out.at(static_cast<Dir>(rr.offset)) = l.result.v;
                    break;
                default:
                    throw SimError(Err::InvalidAddress, "unwritable result region", cycle, x, y);
            }
        }
        if (l.bypass_val) {
            auto& s = out.out.at(Dir::S);
            if (s) throw SimError(Err::RouterConflict, "bypass and commit both drive S", cycle, x, y);
            s = *l.bypass_val;
            out.bypass_driven = true;
        }
    }
};

}  // namespace orchfab
