#include <catch2/catch_amalgamated.hpp>

#include "orchfab/common.hpp"
#include "orchfab/pe.hpp"

using namespace orchfab;

namespace {

Instruction mov(Address src, Address dst, uint8_t flags = 0) {
    Instruction in;
    in.op = Opcode::MOV;
    in.op1 = src;
    in.res = dst;
    in.flags = flags;
    return in;
}

Instruction svmac(int32_t scalar, Address vec, Address dst, uint8_t flags = 0) {
    Instruction in;
    in.op = Opcode::SVMAC;
    in.op1 = Address::imm();
    in.op2 = vec;
    in.res = dst;
    in.imm = scalar;
    in.flags = flags;
    return in;
}

void set_dmem(PeState& pe, int addr, std::array<int8_t, 4> bytes) {
    for (int i = 0; i < 4; ++i) pe.dmem[addr + i] = bytes[i];
}

}  // namespace

TEST_CASE("vector alu hand cases", "[pe]") {
    VecWord b{{1, 2, 3, 4}};
    auto r = vector_alu(Opcode::SVMAC, VecWord::broadcast(2), true, b, VecWord::zero());
    REQUIRE(r.has_value());
    CHECK(r.value().v == VecWord{{2, 4, 6, 8}});

    auto add = vector_alu(Opcode::VVADD, VecWord{{1, 1, 1, 1}}, false, VecWord::zero(), VecWord::zero());
    REQUIRE(add.has_value());
    CHECK(add.value().v == VecWord{{1, 1, 1, 1}});

    auto sum = vector_alu(Opcode::VSUM, VecWord{{3, -1, 4, 2}}, false, VecWord::zero(), VecWord::zero());
    REQUIRE(sum.has_value());
    CHECK(sum.value().scalar);
    CHECK(sum.value().v.lane[0] == 8);

    auto bad = vector_alu(Opcode::SVMAC, b, false, b, VecWord::zero());
    REQUIRE(!bad.has_value());
    CHECK(bad.error() == Err::OperandShape);
}

TEST_CASE("vector alu agrees with a scalar reference loop", "[pe]") {
    Rng rng(99);
    for (int trial = 0; trial < 100000; ++trial) {
        VecWord a, b, acc;
        for (int i = 0; i < kSimdWidth; ++i) {
            a.lane[i] = rng.range(-128, 127);
            b.lane[i] = rng.range(-128, 127);
            acc.lane[i] = rng.range(-100000, 100000);
        }
        int which = rng.bounded(4);
        Opcode op = which == 0 ? Opcode::SVMAC : which == 1 ? Opcode::VVMAC : which == 2 ? Opcode::VVADD
                                                                                         : Opcode::VSUM;
        auto r = vector_alu(op, op == Opcode::SVMAC ? VecWord::broadcast(a.lane[0]) : a,
                            op == Opcode::SVMAC, b, acc);
        REQUIRE(r.has_value());
        if (op == Opcode::VSUM) {
            int32_t ref = 0;
            for (int i = 0; i < kSimdWidth; ++i) ref += a.lane[i];
            REQUIRE(r.value().v.lane[0] == ref);
        } else {
            for (int i = 0; i < kSimdWidth; ++i) {
                int32_t ref = op == Opcode::SVMAC  ? acc.lane[i] + a.lane[0] * b.lane[i]
                              : op == Opcode::VVMAC ? acc.lane[i] + a.lane[i] * b.lane[i]
                                                    : a.lane[i] + b.lane[i];
                REQUIRE(r.value().v.lane[i] == ref);
            }
        }
    }
}

TEST_CASE("three nops leave the pe unchanged and forward with the pipeline delay", "[pe]") {
    PeState pe;
    PeState ref = pe;
    PortFrame empty;
    auto t0 = pe.pe_tick(Instruction::nop(), empty, 0);
    CHECK(!t0.forward.has_value());
    auto t1 = pe.pe_tick(Instruction::nop(), empty, 1);
    CHECK(!t1.forward.has_value());
    auto t2 = pe.pe_tick(Instruction::nop(), empty, 2);
    REQUIRE(t2.forward.has_value());
    CHECK(t2.forward.value() == Instruction::nop());
    CHECK(pe.dmem == ref.dmem);
    CHECK(pe.vregs == ref.vregs);
    CHECK(pe.spad == ref.spad);
}

TEST_CASE("svmac result becomes visible at commit, two cycles after load", "[pe]") {
    PeState pe;
    set_dmem(pe, 0, {1, 0, 2, 1});
    PortFrame empty;
    pe.pe_tick(svmac(5, Address::dmem(0), Address::vreg(0)), empty, 0);
    CHECK(pe.vregs[0] == VecWord::zero());  // t+1: still computing
    pe.pe_tick(Instruction::nop(), empty, 1);
    CHECK(pe.vregs[0] == VecWord::zero());
    pe.pe_tick(Instruction::nop(), empty, 2);
    CHECK(pe.vregs[0] == VecWord{{5, 0, 10, 5}});
}

TEST_CASE("back-to-back accumulations into one register chain correctly", "[pe]") {
    PeState pe;
    set_dmem(pe, 0, {1, 1, 1, 1});
    set_dmem(pe, 4, {2, 2, 2, 2});
    PortFrame empty;
    pe.pe_tick(svmac(3, Address::dmem(0), Address::vreg(0)), empty, 0);
    pe.pe_tick(svmac(10, Address::dmem(4), Address::vreg(0)), empty, 1);
    pe.pe_tick(Instruction::nop(), empty, 2);
    pe.pe_tick(Instruction::nop(), empty, 3);
    CHECK(pe.vregs[0] == VecWord{{23, 23, 23, 23}});
}

TEST_CASE("a fresh-accumulator flag starts the chain from zero", "[pe]") {
    PeState pe;
    set_dmem(pe, 0, {1, 1, 1, 1});
    PortFrame empty;
    pe.vregs[0] = VecWord::broadcast(100);
    pe.pe_tick(svmac(2, Address::dmem(0), Address::vreg(0), kFlagAccInit), empty, 0);
    pe.pe_tick(Instruction::nop(), empty, 1);
    pe.pe_tick(Instruction::nop(), empty, 2);
    CHECK(pe.vregs[0] == VecWord::broadcast(2));
}

// Two-PE hand trace: PE0 moves vreg0 east; the value must appear on PE1's
// west port three cycles after PE0 loaded the move, and PE1 captures it with
// a load issued that same cycle.
TEST_CASE("two-pe routed move follows the staggered timing", "[pe]") {
    PeState pe0, pe1;
    pe0.vregs[0] = VecWord{{7, 8, 9, 10}};
    PortFrame empty;

    // cycle 0: PE0 loads the MOV
    auto c0 = pe0.pe_tick(mov(Address::vreg(0), Address::port(Dir::E)), empty, 0);
    CHECK(!c0.out.any());
    pe1.pe_tick(Instruction::nop(), empty, 0);

    // cycle 1: compute
    auto c1 = pe0.pe_tick(Instruction::nop(), empty, 1);
    CHECK(!c1.out.any());
    pe1.pe_tick(Instruction::nop(), empty, 1);

    // cycle 2: PE0 commits onto its east port
    auto c2 = pe0.pe_tick(Instruction::nop(), empty, 2);
    REQUIRE(c2.out.at(Dir::E).has_value());
    CHECK(c2.out.at(Dir::E).value() == VecWord{{7, 8, 9, 10}});
    pe1.pe_tick(Instruction::nop(), empty, 2);

    // cycle 3: the hop delivers; PE1 loads from west in the same cycle
    PortFrame arrive;
    arrive.at(Dir::W) = c2.out.at(Dir::E);
    pe0.pe_tick(Instruction::nop(), empty, 3);
    pe1.pe_tick(mov(Address::port(Dir::W), Address::vreg(1)), arrive, 3);

    pe1.pe_tick(Instruction::nop(), empty, 4);
    pe1.pe_tick(Instruction::nop(), empty, 5);
    CHECK(pe1.vregs[1] == VecWord{{7, 8, 9, 10}});
}

TEST_CASE("loading from an undriven port is a rendezvous violation", "[pe]") {
    PeState pe;
    PortFrame empty;
    CHECK_THROWS_AS(pe.pe_tick(mov(Address::port(Dir::N), Address::vreg(0)), empty, 0), SimError);
}

TEST_CASE("scratchpad fifo laws", "[pe]") {
    PeState pe;
    SECTION("push three rows then pop returns the oldest and advances rid_start") {
        REQUIRE(pe.spad_push(VecWord::broadcast(10)).has_value());
        REQUIRE(pe.spad_push(VecWord::broadcast(11)).has_value());
        REQUIRE(pe.spad_push(VecWord::broadcast(12)).has_value());
        auto v = pe.spad_pop();
        REQUIRE(v.has_value());
        CHECK(v.value() == VecWord::broadcast(10));
        CHECK(pe.spad_meta.rid_start == 1);
        CHECK(pe.spad_meta.len == 2);
    }
    SECTION("row ids outside the window are not managed") {
        for (int i = 0; i < 4; ++i) REQUIRE(pe.spad_push(VecWord::broadcast(i)).has_value());
        CHECK(pe.spad_is_managing(1));
        CHECK(!pe.spad_is_managing(5));
        CHECK(!pe.spad_index_of(5).has_value());
    }
    SECTION("the seventeenth push overflows") {
        for (int i = 0; i < 16; ++i) REQUIRE(pe.spad_push(VecWord::broadcast(i)).has_value());
        auto r = pe.spad_push(VecWord::broadcast(99));
        REQUIRE(!r.has_value());
        CHECK(r.error() == Err::BufferFull);
    }
    SECTION("pop on empty") {
        auto r = pe.spad_pop();
        REQUIRE(!r.has_value());
        CHECK(r.error() == Err::BufferEmpty);
    }
    SECTION("fifo order is preserved") {
        Rng rng(5);
        std::vector<int64_t> pushed;
        int64_t next = 0;
        std::vector<int64_t> popped;
        for (int step = 0; step < 200; ++step) {
            if (pe.spad_meta.len < 16 && (pe.spad_meta.len == 0 || rng.bounded(2))) {
                REQUIRE(pe.spad_push(VecWord::broadcast(static_cast<int32_t>(next))).has_value());
                pushed.push_back(next++);
            } else {
                auto v = pe.spad_pop();
                REQUIRE(v.has_value());
                popped.push_back(v.value().lane[0]);
            }
        }
        while (pe.spad_meta.len > 0) popped.push_back(pe.spad_pop().value().lane[0]);
        CHECK(popped == pushed);
    }
}

TEST_CASE("identical streams replay to identical state", "[pe]") {
    auto run = []() {
        PeState pe;
        set_dmem(pe, 0, {3, 1, 4, 1});
        PortFrame empty;
        pe.pe_tick(svmac(2, Address::dmem(0), Address::vreg(0)), empty, 0);
        pe.pe_tick(mov(Address::vreg(0), Address::spad(0)), empty, 1);
        pe.pe_tick(svmac(-1, Address::dmem(0), Address::vreg(0)), empty, 2);
        pe.pe_tick(Instruction::nop(), empty, 3);
        pe.pe_tick(Instruction::nop(), empty, 4);
        return pe;
    };
    PeState a = run();
    PeState b = run();
    CHECK(a.vregs == b.vregs);
    CHECK(a.spad == b.spad);
    CHECK(a.dmem == b.dmem);
}
