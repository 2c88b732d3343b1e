#include <catch2/catch_amalgamated.hpp>

#include "orchfab/common.hpp"
#include "orchfab/isa.hpp"

using namespace orchfab;

TEST_CASE("address decode is total and maps the fixed regions", "[isa]") {
    CHECK(decode_address(Address{0x0004}) == Region{RegionKind::DataMemory, 4});
    CHECK(decode_address(Address{0x1000}) == Region{RegionKind::Scratchpad, 0});
    CHECK(decode_address(Address{0x1102}) == Region{RegionKind::RouterPort, static_cast<uint16_t>(Dir::S)});
    CHECK(decode_address(Address{0x1203}) == Region{RegionKind::VReg, 3});
    CHECK(decode_address(Address{0x1300}).kind == RegionKind::Immediate);
    CHECK(decode_address(Address{0xFFFF}).kind == RegionKind::Null);
    CHECK(decode_address(Address{0x2000}).kind == RegionKind::Invalid);
    CHECK(decode_address(Address{0x1104}).kind == RegionKind::Invalid);
}

TEST_CASE("address regions partition the raw space and encode round-trips", "[isa]") {
    int counts[7] = {};
    for (uint32_t raw = 0; raw <= 0xFFFF; ++raw) {
        Region r = decode_address(Address{static_cast<uint16_t>(raw)});
        counts[static_cast<int>(r.kind)]++;
        if (r.kind != RegionKind::Invalid) {
            auto back = encode_address(r.kind, r.offset);
            REQUIRE(back.has_value());
            REQUIRE(back.value().raw == raw);
        }
    }
    CHECK(counts[static_cast<int>(RegionKind::DataMemory)] == 4096);
    CHECK(counts[static_cast<int>(RegionKind::Scratchpad)] == 64);
    CHECK(counts[static_cast<int>(RegionKind::RouterPort)] == 4);
    CHECK(counts[static_cast<int>(RegionKind::VReg)] == 4);
    CHECK(counts[static_cast<int>(RegionKind::Immediate)] == 1);
    CHECK(counts[static_cast<int>(RegionKind::Null)] == 1);
    CHECK(counts[static_cast<int>(RegionKind::Invalid)] == 65536 - 4096 - 64 - 4 - 4 - 1 - 1);
}

TEST_CASE("nop packs to an all-null word with opcode field zero", "[isa]") {
    Instruction nop = Instruction::nop();
    PackedInstruction p = pack_instruction(nop);
    CHECK(((p.hi >> 16) & 0xFF) == 0);
    std::string hex = to_hex(p);
    CHECK(hex.size() == 22);
    CHECK(hex == "00ffffffffffff00000000");
    auto back = unpack_instruction(p);
    REQUIRE(back.has_value());
    CHECK(back.value() == nop);
}

TEST_CASE("svmac word round-trips bit-exactly", "[isa]") {
    Instruction in;
    in.op = Opcode::SVMAC;
    in.op1 = Address::imm();
    in.op2 = Address::dmem(8);
    in.res = Address::vreg(0);
    in.imm = 7;
    PackedInstruction p = pack_instruction(in);
    auto back = unpack_instruction(p);
    REQUIRE(back.has_value());
    CHECK(back.value() == in);
    auto hex_back = from_hex(to_hex(p));
    REQUIRE(hex_back.has_value());
    CHECK(hex_back.value() == p);
}

TEST_CASE("word with an out-of-range opcode field is rejected", "[isa]") {
    PackedInstruction p;
    p.hi = 0xFFu << 16;
    auto r = unpack_instruction(p);
    REQUIRE(!r.has_value());
    CHECK(r.error() == Err::MalformedInstruction);
}

TEST_CASE("unpack-of-pack is identity on random valid instructions", "[isa]") {
    Rng rng(12345);
    auto random_addr = [&](bool writable) {
        switch (rng.bounded(writable ? 5 : 6)) {
            case 0: return Address::dmem(static_cast<uint16_t>(rng.bounded(kDmemBytes)));
            case 1: return Address::spad(static_cast<uint16_t>(rng.bounded(kSpadBytes)));
            case 2: return Address::port(static_cast<Dir>(rng.bounded(4)));
            case 3: return Address::vreg(static_cast<uint16_t>(rng.bounded(4)));
            case 4: return Address::null();
            default: return Address::imm();
        }
    };
    for (int i = 0; i < 10000; ++i) {
        Instruction in;
        in.op = static_cast<Opcode>(rng.bounded(kOpcodeCount));
        in.flags = static_cast<uint8_t>(rng.bounded(16));
        in.op1 = random_addr(false);
        in.op2 = random_addr(false);
        in.res = random_addr(true);
        in.imm = static_cast<int32_t>(rng.raw());
        auto back = unpack_instruction(pack_instruction(in));
        REQUIRE(back.has_value());
        REQUIRE(back.value() == in);
        auto hexed = from_hex(to_hex(pack_instruction(in)));
        REQUIRE(hexed.has_value());
        REQUIRE(hexed.value() == pack_instruction(in));
    }
}

TEST_CASE("instruction legality is a pure predicate", "[isa]") {
    Instruction ok;
    ok.op = Opcode::SVMAC;
    ok.op1 = Address::imm();
    ok.op2 = Address::dmem(0);
    ok.res = Address::vreg(0);
    CHECK(validate_instruction(ok).has_value());

    SECTION("an instruction never both reads and writes one port direction") {
        Instruction bad;
        bad.op = Opcode::MOV;
        bad.op1 = Address::port(Dir::E);
        bad.res = Address::port(Dir::E);
        auto r = validate_instruction(bad);
        REQUIRE(!r.has_value());
        CHECK(r.error() == Err::RouterConflict);
    }
    SECTION("bypass counts as reading N and writing S") {
        Instruction bad;
        bad.op = Opcode::MOV;
        bad.flags = kFlagBypassNS;
        bad.op1 = Address::vreg(0);
        bad.res = Address::port(Dir::S);
        auto r = validate_instruction(bad);
        REQUIRE(!r.has_value());
        CHECK(r.error() == Err::RouterConflict);

        Instruction good = bad;
        good.res = Address::port(Dir::E);
        CHECK(validate_instruction(good).has_value());
    }
    SECTION("svmac requires the scalar on op1") {
        Instruction bad = ok;
        bad.op1 = Address::dmem(0);
        auto r = validate_instruction(bad);
        REQUIRE(!r.has_value());
        CHECK(r.error() == Err::OperandShape);
    }
    SECTION("immediate is not writable") {
        Instruction bad = ok;
        bad.res = Address::imm();
        CHECK(!validate_instruction(bad).has_value());
    }
}
