// programs.hpp - generators for the shipped orchestrator FSM programs. The
// kernel planner instantiates these with the plan's constants (rows per PE,
// window capacity, chunks per block, flush period) baked in.
#pragma once

#include "orchfab/microcode.hpp"

namespace orchfab {
namespace programs {

namespace detail {

struct RuleBuilder {
    FsmProgram* p;
    FsmRule r;

    RuleBuilder(FsmProgram* prog, const char* state, const char* tag, const char* msg, int c0, int c1)
        : p(prog) {
        r.state = id(p->states, state);
        r.tag = id(p->tags, tag);
        r.msg = id(p->msgs, msg);
        r.cond0 = c0;
        r.cond1 = c1;
    }

    static int id(const std::vector<std::string>& v, const char* n) {
        if (std::string(n) == "*") return -1;
        int i = FsmProgram::find_name(v, n);
        if (i < 0) throw SimError(Err::ParseError, std::string("unknown name ") + n);
        return i;
    }

    RuleBuilder& does(Opcode op, OpSel a, OpSel b, OpSel dst, AddrMode mode) {
        r.op = op;
        r.op1 = a;
        r.op2 = b;
        r.res = dst;
        r.mode = mode;
        return *this;
    }
    RuleBuilder& sends(const char* msg, MsgPayloadSel pay) {
        r.msg_out = id(p->msgs, msg);
        r.payload = pay;
        return *this;
    }
    RuleBuilder& then(MetaAction act, const char* next) {
        r.action = act;
        r.next_state = std::string(next) == "same" ? FsmRule::kSameState : id(p->states, next);
        p->rules.push_back(r);
        return *this;
    }
};

}  // namespace detail

// Row-wise sparse matmul with FIFO psum buffering: MACs accumulate per-row
// psums in the scratchpad window; finished rows bank until the window is
// full, then each row end evicts the oldest psum southward; psums arriving
// from the north are merged when their row is managed and passed through
// otherwise.
inline FsmProgram spmm_buffered(int rows_per_pe, int spad_window) {
    FsmProgram p;
    p.name = "spmm";
    p.states = {"IDLE", "MAC", "FLUSH", "ACC", "BYPASS", "BANK"};
    p.tags = {"NONE", "NNZ", "ROWEND", "EOS"};
    p.msgs = {"NONE", "PSUM"};
    p.eos_tag = 3;
    p.rowend_tag = 2;
    p.cond0 = CondKind::ManagedWindow;
    p.cond1 = CondKind::EvictOrDrain;
    p.consts.c1 = rows_per_pe;
    p.consts.cap = spad_window;
    using B = detail::RuleBuilder;
    using enum OpSel;
    // managed psum from the north: merge into its scratchpad slot
    B(&p, "*", "*", "PSUM", 1, -1)
        .does(Opcode::VVADD, PortN, Spad, Spad, AddrMode::SpmmAcc)
        .then(MetaAction::None, "ACC");
    // unmanaged psum while a nonzero is pending: compute and pass through
    B(&p, "*", "NNZ", "PSUM", 0, -1)
        .does(Opcode::SVMAC, Imm, Dmem, Spad, AddrMode::SpmmMacByp)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::MacExtend, "MAC");
    // unmanaged psum with no compute to ride on: dedicated pass-through
    B(&p, "*", "*", "PSUM", 0, -1)
        .does(Opcode::MOV, PortN, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::None, "BYPASS");
    B(&p, "*", "NNZ", "NONE", -1, -1)
        .does(Opcode::SVMAC, Imm, Dmem, Spad, AddrMode::SpmmMac)
        .then(MetaAction::MacExtend, "MAC");
    // row end with the window at capacity: evict the oldest psum southward
    B(&p, "*", "ROWEND", "NONE", -1, 1)
        .does(Opcode::MOV, Spad, Null, PortS, AddrMode::SpmmFlush)
        .sends("PSUM", MsgPayloadSel::RidStart)
        .then(MetaAction::RowEndEvict, "FLUSH");
    // row end with room: bank the finished row and keep it managed
    B(&p, "*", "ROWEND", "NONE", -1, 0)
        .does(Opcode::MOV, Spad, Null, Spad, AddrMode::SpmmBank)
        .then(MetaAction::RowEndBank, "BANK");
    // stream done: drain the window
    B(&p, "*", "EOS", "NONE", -1, 1)
        .does(Opcode::MOV, Spad, Null, PortS, AddrMode::SpmmFlush)
        .sends("PSUM", MsgPayloadSel::RidStart)
        .then(MetaAction::DrainPop, "FLUSH");
    B(&p, "*", "EOS", "NONE", -1, 0).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::None, "IDLE");
    B(&p, "*", "NONE", "NONE", -1, -1).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::None, "IDLE");
    return p;
}

// Structured flow without scratchpad balancing: psums accumulate in a vector
// register and are flushed south every nflush nonzeros; the row-final flush
// rides the row-end token. Dense matmul is the nflush == rows_per_pe case.
inline FsmProgram spmm_direct(int rows_per_pe, int nflush) {
    FsmProgram p;
    p.name = "spmm_direct";
    p.states = {"IDLE", "MACG", "GEND"};
    p.tags = {"NONE", "NNZ", "ROWEND", "EOS"};
    p.msgs = {"NONE", "PSUM"};
    p.eos_tag = 3;
    p.rowend_tag = 2;
    p.cond0 = CondKind::MsgCurRow;
    p.cond1 = CondKind::GroupLast;
    p.consts.c1 = rows_per_pe;
    p.consts.nflush = nflush;
    using B = detail::RuleBuilder;
    using enum OpSel;
    // mid-group psum for the live row merges into the register accumulator
    B(&p, "MACG", "*", "PSUM", 1, -1)
        .does(Opcode::VVADD, PortN, V0, V0, AddrMode::None)
        .then(MetaAction::None, "MACG");
    B(&p, "GEND", "*", "PSUM", 1, -1)
        .does(Opcode::VVADD, PortN, V0, V0, AddrMode::None)
        .then(MetaAction::None, "GEND");
    // a pending flush defers for one cycle while a foreign psum passes
    B(&p, "GEND", "*", "PSUM", 0, -1)
        .does(Opcode::MOV, PortN, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::None, "GEND");
    B(&p, "GEND", "NNZ", "NONE", -1, -1)
        .does(Opcode::MOV, V0, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::CurRid)
        .then(MetaAction::GroupFlush, "IDLE");
    B(&p, "GEND", "ROWEND", "NONE", -1, -1)
        .does(Opcode::MOV, V0, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::CurRid)
        .then(MetaAction::GroupFlushRowAdv, "IDLE");
    B(&p, "GEND", "EOS", "NONE", -1, -1)
        .does(Opcode::MOV, V0, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::CurRid)
        .then(MetaAction::GroupFlush, "IDLE");
    B(&p, "MACG", "NNZ", "PSUM", 0, 0)
        .does(Opcode::SVMAC, Imm, Dmem, V0, AddrMode::NmMacByp)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::GroupInc, "MACG");
    B(&p, "MACG", "NNZ", "PSUM", 0, 1)
        .does(Opcode::SVMAC, Imm, Dmem, V0, AddrMode::NmMacByp)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::GroupInc, "GEND");
    B(&p, "MACG", "NNZ", "NONE", -1, 0)
        .does(Opcode::SVMAC, Imm, Dmem, V0, AddrMode::NmMac)
        .then(MetaAction::GroupInc, "MACG");
    B(&p, "MACG", "NNZ", "NONE", -1, 1)
        .does(Opcode::SVMAC, Imm, Dmem, V0, AddrMode::NmMac)
        .then(MetaAction::GroupInc, "GEND");
    // ragged tail: a row end inside a group flushes the partial psum
    B(&p, "MACG", "ROWEND", "NONE", -1, -1)
        .does(Opcode::MOV, V0, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::CurRid)
        .then(MetaAction::GroupFlushRowAdv, "IDLE");
    B(&p, "MACG", "ROWEND", "PSUM", 0, -1)
        .does(Opcode::MOV, PortN, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::None, "MACG");
    B(&p, "MACG", "EOS", "PSUM", 0, -1)
        .does(Opcode::MOV, PortN, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::None, "MACG");
    B(&p, "IDLE", "NNZ", "PSUM", -1, 0)
        .does(Opcode::SVMAC, Imm, Dmem, V0, AddrMode::NmMacInitByp)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::GroupInc, "MACG");
    B(&p, "IDLE", "NNZ", "PSUM", -1, 1)
        .does(Opcode::SVMAC, Imm, Dmem, V0, AddrMode::NmMacInitByp)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::GroupInc, "GEND");
    B(&p, "IDLE", "NNZ", "NONE", -1, 0)
        .does(Opcode::SVMAC, Imm, Dmem, V0, AddrMode::NmMacInit)
        .then(MetaAction::GroupInc, "MACG");
    B(&p, "IDLE", "NNZ", "NONE", -1, 1)
        .does(Opcode::SVMAC, Imm, Dmem, V0, AddrMode::NmMacInit)
        .then(MetaAction::GroupInc, "GEND");
    B(&p, "IDLE", "ROWEND", "NONE", -1, -1)
        .does(Opcode::NOP, Null, Null, Null, AddrMode::None)
        .then(MetaAction::RowAdv, "IDLE");
    B(&p, "IDLE", "ROWEND", "PSUM", -1, -1)
        .does(Opcode::MOV, PortN, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::None, "IDLE");
    B(&p, "IDLE", "EOS", "NONE", -1, -1).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::None, "IDLE");
    B(&p, "IDLE", "EOS", "PSUM", -1, -1)
        .does(Opcode::MOV, PortN, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::None, "IDLE");
    B(&p, "IDLE", "NONE", "NONE", -1, -1).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::None, "IDLE");
    B(&p, "IDLE", "NONE", "PSUM", -1, -1)
        .does(Opcode::MOV, PortN, Null, PortS, AddrMode::None)
        .sends("PSUM", MsgPayloadSel::Relay)
        .then(MetaAction::None, "IDLE");
    return p;
}

// Output-masked dense product: vectors of the streamed matrix arrive from
// the north, are stored in the scratchpad ring and forwarded south; each
// masked output position runs a block of chunk x tile MACs and then joins
// the west-to-east psum chain, which the last column folds to a scalar.
// A hit token with value > 1 repeats the block over consecutive columns.
inline FsmProgram sddmm_block(int chunks_per_set, int spad_window) {
    FsmProgram p;
    p.name = "sddmm";
    p.states = {"READY", "CHUNKST", "MACB", "CHAINP"};
    p.tags = {"NONE", "CHUNK", "HIT", "PAD", "SETEND", "EOS"};
    p.msgs = {"NONE", "PSUM"};
    p.eos_tag = 5;
    p.cond0 = CondKind::BlkLast;
    p.cond1 = CondKind::WinLast;
    p.consts.wc = chunks_per_set;
    p.consts.cap = spad_window;
    using B = detail::RuleBuilder;
    using enum OpSel;
    B(&p, "READY", "CHUNK", "NONE", -1, -1)
        .does(Opcode::MOV, PortN, Null, Spad, AddrMode::ChunkIn)
        .then(MetaAction::ChunkArrive, "CHUNKST");
    B(&p, "CHUNKST", "CHUNK", "NONE", -1, -1)
        .does(Opcode::MOV, PortN, Null, Spad, AddrMode::ChunkIn)
        .then(MetaAction::ChunkArrive, "CHUNKST");
    for (const char* s : {"READY", "CHUNKST"}) {
        B(&p, s, "HIT", "NONE", 0, -1)
            .does(Opcode::VVMAC, Spad, Dmem, V0, AddrMode::BlkMacInit)
            .then(MetaAction::BlkStep, "MACB");
        B(&p, s, "HIT", "NONE", 1, -1)
            .does(Opcode::VVMAC, Spad, Dmem, V0, AddrMode::BlkMacInit)
            .then(MetaAction::BlkStep, "CHAINP");
    }
    B(&p, "MACB", "HIT", "NONE", 0, -1)
        .does(Opcode::VVMAC, Spad, Dmem, V0, AddrMode::BlkMac)
        .then(MetaAction::BlkStep, "MACB");
    B(&p, "MACB", "HIT", "NONE", 1, -1)
        .does(Opcode::VVMAC, Spad, Dmem, V0, AddrMode::BlkMac)
        .then(MetaAction::BlkStep, "CHAINP");
    B(&p, "CHAINP", "HIT", "NONE", -1, 1)
        .does(Opcode::VVADD, PortW, V0, PortE, AddrMode::ChainReduce)
        .then(MetaAction::BlkDone, "READY");
    B(&p, "CHAINP", "HIT", "NONE", -1, 0)
        .does(Opcode::VVADD, PortW, V0, PortE, AddrMode::ChainReduce)
        .then(MetaAction::BlkDoneNext, "READY");
    for (const char* s : {"READY", "CHUNKST"}) {
        B(&p, s, "PAD", "NONE", -1, -1).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::Consume, "READY");
        B(&p, s, "SETEND", "NONE", -1, -1).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::SetEnd, "READY");
    }
    B(&p, "READY", "EOS", "NONE", -1, -1).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::None, "READY");
    B(&p, "READY", "NONE", "NONE", -1, -1).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::None, "READY");
    B(&p, "CHUNKST", "NONE", "NONE", -1, -1).does(Opcode::NOP, Null, Null, Null, AddrMode::None).then(MetaAction::None, "CHUNKST");
    return p;
}

}  // namespace programs
}  // namespace orchfab
