// orchestrator.hpp - the per-row FSM engine: registers, the two statically
// wired condition predicates, and dynamic instruction / message / next-state
// generation from either the symbolic program or its assembled bitstream.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "orchfab/microcode.hpp"

namespace orchfab {

// Stream tokens feeding an orchestrator. Tag ids are program-defined; rid and
// cid are coordinates of a nonzero of the streamed matrix, value its payload.
struct StreamToken {
    uint8_t tag = 0;
    int64_t rid = 0;
    int64_t cid = 0;
    int32_t value = 0;

    bool operator==(const StreamToken&) const = default;
};

// Inter-orchestrator message. id 0 means no message; payload is a row index.
struct OrchMessage {
    uint8_t id = 0;
    int64_t rid = 0;
    uint64_t packet = 0;  // simulator-side tag for conservation accounting

    bool none() const { return id == 0; }
    bool operator==(const OrchMessage& o) const { return id == o.id && rid == o.rid; }
};

constexpr uint8_t kMsgNone = 0;
constexpr uint8_t kMsgPSum = 1;

// State-meta register file. Field roles are fixed; each program uses the
// subset its rules reference.
struct OrchMeta {
    int64_t rid_start = 0;  // oldest managed row id
    int64_t buf_len = 0;    // managed window length in rows
    int64_t cur_rid = 0;    // row currently streaming
    int64_t group_cnt = 0;  // elements seen in the current flush group
    int64_t chunk_w = 0;    // scratchpad ring slot for the next chunk
    int64_t set_base = 0;   // ring base of the current chunk set
    int64_t blk_w = 0;      // position within a MAC block
    int64_t win_i = 0;      // row index within a multi-row window token

    bool operator==(const OrchMeta&) const = default;
};

struct OrchRegisters {
    uint8_t state = 0;
    OrchMeta meta;
    StreamToken input;  // latched head token
    OrchMessage msg;    // message visible to the FSM this cycle

    bool operator==(const OrchRegisters&) const = default;
};

struct CondBits {
    bool c0 = false;
    bool c1 = false;
};

inline bool eval_cond(CondKind kind, const OrchRegisters& regs, const FsmProgram& p) {
    const OrchMeta& m = regs.meta;
    switch (kind) {
        case CondKind::False:
            return false;
        case CondKind::ManagedWindow:
            return regs.msg.id == kMsgPSum && regs.msg.rid >= m.rid_start &&
                   regs.msg.rid < m.rid_start + m.buf_len;
        case CondKind::MsgCurRow:
            return regs.msg.id == kMsgPSum && regs.msg.rid == m.cur_rid;
        case CondKind::EvictOrDrain:
            if (p.rowend_tag >= 0 && regs.input.tag == p.rowend_tag)
                return regs.input.rid - m.rid_start + 1 >= p.consts.cap;
            if (p.eos_tag >= 0 && regs.input.tag == p.eos_tag) return m.buf_len > 0;
            return false;
        case CondKind::GroupLast:
            return m.group_cnt == p.consts.nflush - 1;
        case CondKind::BlkLast:
            return m.blk_w == p.consts.wc - 1;
        case CondKind::WinLast:
            return m.win_i == regs.input.value - 1;
    }
    return false;
}

// The two statically configured predicates, pure in the registers.
inline CondBits eval_conditions(const OrchRegisters& regs, const FsmProgram& p) {
    return CondBits{eval_cond(p.cond0, regs, p), eval_cond(p.cond1, regs, p)};
}

// A program together with its assembled bitstream. The fabric can execute
// from either side; both must agree entry for entry.
struct CompiledProgram {
    FsmProgram program;
    LutBitstream lut;

    static Expected<CompiledProgram> compile(const FsmProgram& p) {
        auto bs = assemble(p);
        if (!bs) return bs.error();
        return CompiledProgram{p, *bs};
    }
};

struct StepOut {
    Instruction inst;          // exactly one instruction per cycle (possibly NOP)
    OrchMessage south;         // id 0 when silent
    bool south_is_relay = false;
    bool consume = false;      // head token consumed this cycle
    bool transition = false;   // state register changed
    bool mac_issued = false;
};

namespace detail {

struct ModeAddrs {
    uint16_t dmem = 0;
    uint16_t spad_src = 0;
    uint16_t spad_dst = 0;
    uint8_t flags = 0;
};

inline uint16_t spad_byte(int64_t slot) { return static_cast<uint16_t>(slot * 4); }

inline ModeAddrs eval_mode(AddrMode mode, const OrchRegisters& regs, const OrchConsts& k) {
    ModeAddrs a;
    const OrchMeta& m = regs.meta;
    auto posmod = [](int64_t v, int64_t q) { return static_cast<int64_t>(((v % q) + q) % q); };
    switch (mode) {
        case AddrMode::None:
            break;
        case AddrMode::SpmmMac:
        case AddrMode::SpmmMacByp:
            a.dmem = static_cast<uint16_t>(posmod(regs.input.cid, k.c1) * kSimdWidth);
            a.spad_dst = spad_byte(posmod(regs.input.rid, k.cap));
            if (mode == AddrMode::SpmmMacByp) a.flags |= kFlagBypassNS;
            break;
        case AddrMode::SpmmAcc:
            a.spad_src = a.spad_dst = spad_byte(posmod(regs.msg.rid, k.cap));
            break;
        case AddrMode::SpmmFlush:
            a.spad_src = spad_byte(posmod(m.rid_start, k.cap));
            a.flags |= kFlagSpadPop;
            break;
        case AddrMode::SpmmBank:
            a.spad_src = a.spad_dst = spad_byte(posmod(regs.input.rid, k.cap));
            break;
        case AddrMode::NmMac:
        case AddrMode::NmMacByp:
        case AddrMode::NmMacInit:
        case AddrMode::NmMacInitByp:
            a.dmem = static_cast<uint16_t>(posmod(regs.input.cid, k.c1) * kSimdWidth);
            if (mode == AddrMode::NmMacByp || mode == AddrMode::NmMacInitByp) a.flags |= kFlagBypassNS;
            if (mode == AddrMode::NmMacInit || mode == AddrMode::NmMacInitByp) a.flags |= kFlagAccInit;
            break;
        case AddrMode::ChunkIn:
            a.spad_dst = spad_byte(posmod(m.chunk_w, k.cap));
            a.flags |= kFlagBypassNS;
            break;
        case AddrMode::BlkMacInit:
        case AddrMode::BlkMac:
            a.spad_src = spad_byte(posmod(m.set_base + m.blk_w, k.cap));
            a.dmem = static_cast<uint16_t>((regs.input.cid + m.win_i) * k.wc + m.blk_w) * kSimdWidth;
            if (mode == AddrMode::BlkMacInit) a.flags |= kFlagAccInit;
            break;
        case AddrMode::ChainReduce:
            a.flags |= kFlagReduceLast;
            break;
    }
    return a;
}

inline Address sel_address(OpSel sel, bool dest_side, const ModeAddrs& a) {
    switch (sel) {
        case OpSel::Null: return Address::null();
        case OpSel::Imm: return Address::imm();
        case OpSel::Dmem: return Address::dmem(a.dmem);
        case OpSel::Spad: return Address::spad(dest_side ? a.spad_dst : a.spad_src);
        case OpSel::PortN: return Address::port(Dir::N);
        case OpSel::PortE: return Address::port(Dir::E);
        case OpSel::PortS: return Address::port(Dir::S);
        case OpSel::PortW: return Address::port(Dir::W);
        case OpSel::V0: return Address::vreg(0);
        case OpSel::V1: return Address::vreg(1);
        case OpSel::V2: return Address::vreg(2);
        case OpSel::V3: return Address::vreg(3);
    }
    return Address::null();
}

inline int64_t payload_value(MsgPayloadSel sel, const OrchRegisters& regs) {
    switch (sel) {
        case MsgPayloadSel::None: return 0;
        case MsgPayloadSel::Relay: return regs.msg.rid;
        case MsgPayloadSel::RidStart: return regs.meta.rid_start;
        case MsgPayloadSel::CurRid: return regs.meta.cur_rid;
        case MsgPayloadSel::TokenRid: return regs.input.rid;
    }
    return 0;
}

// Applies a meta-action bundle. Returns true when the head token is consumed.
inline bool apply_action(MetaAction act, OrchMeta& m, const StreamToken& tok, const OrchConsts& k) {
    auto window_to = [&](int64_t rid) {
        int64_t need = rid - m.rid_start + 1;
        if (need > m.buf_len) m.buf_len = need;
    };
    switch (act) {
        case MetaAction::None:
            return false;
        case MetaAction::Consume:
            return true;
        case MetaAction::MacExtend:
            window_to(tok.rid);
            m.cur_rid = tok.rid;
            return true;
        case MetaAction::RowEndBank:
            window_to(tok.rid);
            m.cur_rid = tok.rid + 1;
            return true;
        case MetaAction::RowEndEvict:
            window_to(tok.rid);
            m.rid_start += 1;
            m.buf_len -= 1;
            m.cur_rid = tok.rid + 1;
            return true;
        case MetaAction::DrainPop:
            m.rid_start += 1;
            m.buf_len -= 1;
            return false;
        case MetaAction::GroupInc:
            m.group_cnt += 1;
            m.cur_rid = tok.rid;
            return true;
        case MetaAction::GroupFlush:
            m.group_cnt = 0;
            return false;
        case MetaAction::GroupFlushRowAdv:
            m.group_cnt = 0;
            m.cur_rid = tok.rid + 1;
            return true;
        case MetaAction::RowAdv:
            m.cur_rid = tok.rid + 1;
            m.group_cnt = 0;
            return true;
        case MetaAction::ChunkArrive:
            m.chunk_w = (m.chunk_w + 1) % k.cap;
            return true;
        case MetaAction::BlkStep:
            m.blk_w += 1;
            return false;
        case MetaAction::BlkDone:
            m.blk_w = 0;
            m.win_i = 0;
            return true;
        case MetaAction::BlkDoneNext:
            m.blk_w = 0;
            m.win_i += 1;
            return false;
        case MetaAction::SetEnd:
            m.set_base = (m.set_base + k.wc) % k.cap;
            m.win_i = 0;
            return true;
    }
    return false;
}

}  // namespace detail

// One orchestrator cycle: look up the LUT entry for the current register
// values (through the bitstream when use_lut is set, through the symbolic
// rules otherwise), materialize the instruction, emit the south message, and
// update state and meta. Throws IllegalTransition when an unreachable index
// is hit.
inline StepOut orchestrator_step(OrchRegisters& regs, const CompiledProgram& cp, bool use_lut = true,
                                 long long cycle = -1, int row = -1) {
    const FsmProgram& p = cp.program;
    CondBits c = eval_conditions(regs, p);
    int idx = lut_index(regs.state, regs.input.tag, regs.msg.id, c.c0, c.c1);
    LutEntry e = use_lut ? cp.lut.entry(idx) : interpret_index(p, idx);
    if (e.is_illegal())
        throw SimError(Err::IllegalTransition,
                       "program '" + p.name + "' has no rule for index " + std::to_string(idx) +
                           " (state=" + std::to_string(regs.state) +
                           " tag=" + std::to_string(regs.input.tag) +
                           " msg=" + std::to_string(regs.msg.id) + " c0=" + std::to_string(c.c0) +
                           " c1=" + std::to_string(c.c1) + ")",
                       cycle, -1, row);

    StepOut out;
    detail::ModeAddrs addrs = detail::eval_mode(e.mode, regs, p.consts);
    out.inst.op = static_cast<Opcode>(e.opcode);
    out.inst.flags = addrs.flags;
    out.inst.op1 = detail::sel_address(e.op1, false, addrs);
    out.inst.op2 = detail::sel_address(e.op2, false, addrs);
    out.inst.res = detail::sel_address(e.res, true, addrs);
    out.inst.imm = regs.input.value;
    out.inst.valid = true;
    out.mac_issued = out.inst.op == Opcode::SVMAC || out.inst.op == Opcode::VVMAC;

    if (e.msg_out != kMsgNone) {
        out.south.id = e.msg_out;
        out.south.rid = detail::payload_value(e.payload, regs);
        out.south_is_relay = e.payload == MsgPayloadSel::Relay;
        out.south.packet = out.south_is_relay ? regs.msg.packet : 0;
    }

    out.consume = detail::apply_action(e.action, regs.meta, regs.input, p.consts);
    out.transition = regs.state != e.next_state;
    regs.state = e.next_state;
    return out;
}

}  // namespace orchfab
