#include <catch2/catch_amalgamated.hpp>

#include "orchfab/orchestrator.hpp"
#include "orchfab/programs.hpp"

using namespace orchfab;

namespace {

CompiledProgram compile(const FsmProgram& p) {
    auto c = CompiledProgram::compile(p);
    REQUIRE(c.has_value());
    return c.value();
}

StreamToken nnz(int64_t rid, int64_t cid, int32_t val) { return StreamToken{1, rid, cid, val}; }
StreamToken rowend(int64_t rid) { return StreamToken{2, rid, 0, 0}; }
StreamToken eos() { return StreamToken{3, 0, 0, 0}; }

}  // namespace

TEST_CASE("condition predicates follow the managed window", "[orchestrator]") {
    FsmProgram p = programs::spmm_buffered(2, 16);
    OrchRegisters regs;
    regs.meta.rid_start = 0;
    regs.meta.buf_len = 4;

    regs.msg = OrchMessage{kMsgPSum, 1};
    CHECK(eval_conditions(regs, p).c0);

    regs.msg = OrchMessage{kMsgPSum, 5};
    CHECK(!eval_conditions(regs, p).c0);

    regs.msg = OrchMessage{};
    CHECK(!eval_conditions(regs, p).c0);

    // window at capacity: the row end that completes entry 16 must evict
    regs.meta.buf_len = 16;
    regs.input = rowend(15);
    CHECK(eval_conditions(regs, p).c1);
    regs.input = rowend(10);
    CHECK(!eval_conditions(regs, p).c1);
}

TEST_CASE("a nonzero with no message becomes a mac with modular addressing", "[orchestrator]") {
    // two B rows per PE: the element at column 1 reads local row 1 mod 2
    CompiledProgram cp = compile(programs::spmm_buffered(2, 16));
    OrchRegisters regs;
    regs.input = nnz(4, 1, 7);
    StepOut out = orchestrator_step(regs, cp);
    CHECK(out.inst.op == Opcode::SVMAC);
    CHECK(decode_address(out.inst.op1).kind == RegionKind::Immediate);
    CHECK(out.inst.op2 == Address::dmem(1 * kSimdWidth));
    CHECK(out.inst.imm == 7);
    CHECK(out.inst.res == Address::spad((4 % 16) * 4));
    CHECK(out.consume);
    CHECK(out.south.id == kMsgNone);
    CHECK(regs.meta.buf_len == 5);  // window now covers rows 0..4
}

TEST_CASE("a row end with a full window flushes the oldest psum south", "[orchestrator]") {
    CompiledProgram cp = compile(programs::spmm_buffered(2, 4));
    OrchRegisters regs;
    regs.meta.rid_start = 0;
    regs.meta.buf_len = 4;  // rows 0..3 managed, capacity 4
    regs.input = rowend(3);
    StepOut out = orchestrator_step(regs, cp);
    CHECK(out.inst.op == Opcode::MOV);
    CHECK(out.inst.op1 == Address::spad(0));  // head slot
    CHECK(out.inst.res == Address::port(Dir::S));
    CHECK((out.inst.flags & kFlagSpadPop));
    CHECK(out.south.id == kMsgPSum);
    CHECK(out.south.rid == 0);
    CHECK(regs.meta.rid_start == 1);
    CHECK(regs.meta.buf_len == 3);
    CHECK(out.consume);
}

TEST_CASE("a row end with room banks the finished row instead", "[orchestrator]") {
    CompiledProgram cp = compile(programs::spmm_buffered(2, 4));
    OrchRegisters regs;
    regs.meta.rid_start = 0;
    regs.meta.buf_len = 1;
    regs.input = rowend(0);
    StepOut out = orchestrator_step(regs, cp);
    CHECK(out.inst.op == Opcode::MOV);
    CHECK(out.inst.op1 == Address::spad(0));
    CHECK(out.inst.res == Address::spad(0));
    CHECK(out.south.id == kMsgNone);
    CHECK(regs.meta.rid_start == 0);
    CHECK(out.consume);
}

TEST_CASE("an early psum bypasses while the local mac proceeds", "[orchestrator]") {
    CompiledProgram cp = compile(programs::spmm_buffered(2, 16));
    OrchRegisters regs;
    regs.meta.rid_start = 0;
    regs.meta.buf_len = 3;  // newest managed row is 2
    regs.input = nnz(2, 0, 5);
    regs.msg = OrchMessage{kMsgPSum, 5};
    StepOut out = orchestrator_step(regs, cp);
    CHECK(out.inst.op == Opcode::SVMAC);
    CHECK((out.inst.flags & kFlagBypassNS));
    CHECK(out.south.id == kMsgPSum);
    CHECK(out.south.rid == 5);
    CHECK(out.south_is_relay);
    CHECK(out.consume);
}

TEST_CASE("a managed psum interrupts the stream and accumulates", "[orchestrator]") {
    CompiledProgram cp = compile(programs::spmm_buffered(2, 16));
    OrchRegisters regs;
    regs.meta.rid_start = 0;
    regs.meta.buf_len = 4;
    regs.input = nnz(3, 1, 5);
    regs.msg = OrchMessage{kMsgPSum, 1};
    StepOut out = orchestrator_step(regs, cp);
    CHECK(out.inst.op == Opcode::VVADD);
    CHECK(out.inst.op1 == Address::port(Dir::N));
    CHECK(out.inst.op2 == Address::spad(1 * 4));
    CHECK(out.inst.res == Address::spad(1 * 4));
    CHECK(!out.consume);  // the nonzero waits a cycle
    CHECK(out.south.id == kMsgNone);
}

TEST_CASE("a row-end colliding with a foreign psum defers the flush", "[orchestrator]") {
    CompiledProgram cp = compile(programs::spmm_buffered(2, 4));
    OrchRegisters regs;
    regs.meta.rid_start = 0;
    regs.meta.buf_len = 4;
    regs.input = rowend(3);
    regs.msg = OrchMessage{kMsgPSum, 9};
    StepOut out = orchestrator_step(regs, cp);
    CHECK(out.inst.op == Opcode::MOV);
    CHECK(out.inst.op1 == Address::port(Dir::N));
    CHECK(out.inst.res == Address::port(Dir::S));
    CHECK(!out.consume);
    CHECK(out.south.rid == 9);
    // the deferred row end then flushes normally
    regs.msg = OrchMessage{};
    StepOut out2 = orchestrator_step(regs, cp);
    CHECK(out2.inst.op == Opcode::MOV);
    CHECK((out2.inst.flags & kFlagSpadPop));
    CHECK(out2.consume);
}

TEST_CASE("mac only without a managed message, acc only with one", "[orchestrator]") {
    // the priority structure, checked across the whole input cross-product
    CompiledProgram cp = compile(programs::spmm_buffered(4, 8));
    const FsmProgram& p = cp.program;
    for (int state = 0; state < static_cast<int>(p.states.size()); ++state)
        for (int tag = 0; tag < static_cast<int>(p.tags.size()); ++tag)
            for (int msg = 0; msg < 2; ++msg)
                for (int c0 = 0; c0 < 2; ++c0)
                    for (int c1 = 0; c1 < 2; ++c1) {
                        LutEntry e = interpret_step(p, state, tag, msg, c0, c1);
                        if (e.is_illegal()) continue;
                        Opcode op = static_cast<Opcode>(e.opcode);
                        if (op == Opcode::SVMAC) {
                            // mac requires: no message, or unmanaged message
                            CHECK((msg == 0 || c0 == 0));
                        }
                        if (op == Opcode::VVADD) {
                            // acc requires a managed message
                            CHECK(msg == 1);
                            CHECK(c0 == 1);
                        }
                    }
}

TEST_CASE("drain continues after the stream ends until the window empties", "[orchestrator]") {
    CompiledProgram cp = compile(programs::spmm_buffered(2, 4));
    OrchRegisters regs;
    regs.meta.rid_start = 0;
    regs.meta.buf_len = 2;
    regs.input = eos();
    StepOut f1 = orchestrator_step(regs, cp);
    CHECK(f1.inst.op == Opcode::MOV);
    CHECK(f1.south.rid == 0);
    StepOut f2 = orchestrator_step(regs, cp);
    CHECK(f2.inst.op == Opcode::MOV);
    CHECK(f2.south.rid == 1);
    CHECK(regs.meta.buf_len == 0);
    StepOut f3 = orchestrator_step(regs, cp);
    CHECK(f3.inst.op == Opcode::NOP);
    CHECK(f3.south.id == kMsgNone);
}

TEST_CASE("rid_start never decreases over a run of steps", "[orchestrator]") {
    CompiledProgram cp = compile(programs::spmm_buffered(2, 2));
    OrchRegisters regs;
    int64_t last = 0;
    Rng rng(17);
    std::vector<StreamToken> stream;
    for (int m = 0; m < 20; ++m) {
        if (rng.bounded(2)) stream.push_back(nnz(m, rng.bounded(2), 1));
        stream.push_back(rowend(m));
    }
    size_t cursor = 0;
    for (int cycle = 0; cycle < 200; ++cycle) {
        regs.input = cursor < stream.size() ? stream[cursor] : eos();
        regs.msg = OrchMessage{};
        StepOut out = orchestrator_step(regs, cp);
        if (out.consume) cursor++;
        CHECK(regs.meta.rid_start >= last);
        last = regs.meta.rid_start;
    }
    CHECK(regs.meta.buf_len == 0);
}

TEST_CASE("the interpreter and the bitstream agree on every shipped program", "[orchestrator]") {
    for (const FsmProgram& p :
         {programs::spmm_buffered(8, 16), programs::spmm_buffered(1, 1), programs::spmm_direct(8, 8),
          programs::spmm_direct(4, 2), programs::sddmm_block(4, 16), programs::sddmm_block(1, 16)}) {
        auto bs = assemble(p);
        REQUIRE(bs.has_value());
        CHECK(verify_equivalence(p, bs.value()).empty());
        // text round-trip reassembles identically
        auto reparsed = parse_program(emit_program(p));
        REQUIRE(reparsed.has_value());
        auto bs2 = assemble(reparsed.value());
        REQUIRE(bs2.has_value());
        CHECK(bs.value() == bs2.value());
    }
}

TEST_CASE("an unreachable input tuple raises an illegal transition", "[orchestrator]") {
    CompiledProgram cp = compile(programs::sddmm_block(2, 16));
    OrchRegisters regs;
    regs.state = 2;                        // mid-block
    regs.input = StreamToken{1, 0, 0, 0};  // a chunk arriving there is a planner bug
    CHECK_THROWS_AS(orchestrator_step(regs, cp), SimError);
}
