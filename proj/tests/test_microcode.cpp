#include <catch2/catch_amalgamated.hpp>

#include "orchfab/common.hpp"
#include "orchfab/microcode.hpp"

using namespace orchfab;

namespace {

FsmProgram all_nop_program() {
    FsmProgram p;
    p.name = "nopper";
    p.states = {"IDLE"};
    p.tags = {"NONE"};
    p.msgs = {"NONE"};
    FsmRule r;
    r.op = Opcode::NOP;
    r.next_state = 0;
    r.action = MetaAction::None;
    p.rules.push_back(r);
    return p;
}

}  // namespace

TEST_CASE("single-state all-nop program fills every reachable entry identically", "[microcode]") {
    FsmProgram p = all_nop_program();
    auto bs = assemble(p);
    REQUIRE(bs.has_value());
    // With one state, one tag and one msg id, only index 0..3 are in-alphabet
    // (the two condition bits vary); everything else is the sentinel.
    LutEntry nop_entry = bs.value().entry(0);
    CHECK(nop_entry.opcode == static_cast<uint8_t>(Opcode::NOP));
    CHECK(nop_entry.next_state == 0);
    CHECK(nop_entry.valid);
    for (int idx = 0; idx < kLutEntries; ++idx) {
        bool in_alphabet = ((idx >> 7) & 7) == 0 && ((idx >> 4) & 7) == 0 && ((idx >> 2) & 3) == 0;
        if (in_alphabet)
            CHECK(bs.value().entry(idx) == nop_entry);
        else
            CHECK(bs.value().entry(idx).is_illegal());
    }
}

TEST_CASE("nine states are rejected", "[microcode]") {
    FsmProgram p = all_nop_program();
    p.states = {"a", "b", "c", "d", "e", "f", "g", "h", "i"};
    auto bs = assemble(p);
    REQUIRE(!bs.has_value());
    CHECK(bs.error() == Err::TooManyStates);
}

TEST_CASE("duplicate rule patterns are ambiguous", "[microcode]") {
    FsmProgram p = all_nop_program();
    p.rules.push_back(p.rules[0]);
    auto bs = assemble(p);
    REQUIRE(!bs.has_value());
    CHECK(bs.error() == Err::AmbiguousRules);
}

TEST_CASE("lut entry packing is total over the 48-bit space", "[microcode]") {
    Rng rng(7);
    for (int i = 0; i < 20000; ++i) {
        uint64_t w = (static_cast<uint64_t>(rng.raw()) << 32 | rng.raw()) & ((1ull << 48) - 1);
        LutEntry e = LutEntry::unpack(w);
        // Every field decodes to something representable; repacking keeps the
        // defined fields (reserved bits are dropped).
        LutEntry again = LutEntry::unpack(e.pack());
        CHECK(again == e);
    }
}

TEST_CASE("interpreter matches the bitstream on the exhaustive cross product", "[microcode]") {
    FsmProgram p = all_nop_program();
    auto bs = assemble(p);
    REQUIRE(bs.has_value());
    CHECK(verify_equivalence(p, bs.value()).empty());
}

TEST_CASE("a flipped bit is reported at exactly the affected index", "[microcode]") {
    FsmProgram p = all_nop_program();
    auto bs = assemble(p);
    REQUIRE(bs.has_value());
    LutBitstream broken = bs.value();
    broken.word[3] ^= 1ull << 45;
    auto bad = verify_equivalence(p, broken);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0] == 3);
}

TEST_CASE("program text emits, parses back and reassembles byte-identically", "[microcode]") {
    FsmProgram p;
    p.name = "demo";
    p.states = {"IDLE", "MAC"};
    p.tags = {"NONE", "NNZ", "ROWEND", "EOS"};
    p.msgs = {"NONE", "PSUM"};
    p.eos_tag = 3;
    p.rowend_tag = 2;
    p.cond0 = CondKind::ManagedWindow;
    p.cond1 = CondKind::EvictOrDrain;
    p.consts.c1 = 4;
    p.consts.cap = 8;
    FsmRule mac;
    mac.tag = 1;
    mac.msg = 0;
    mac.op = Opcode::SVMAC;
    mac.op1 = OpSel::Imm;
    mac.op2 = OpSel::Dmem;
    mac.res = OpSel::Spad;
    mac.mode = AddrMode::SpmmMac;
    mac.action = MetaAction::MacExtend;
    mac.next_state = 1;
    p.rules.push_back(mac);
    FsmRule dflt;
    dflt.op = Opcode::NOP;
    dflt.next_state = FsmRule::kSameState;
    p.rules.push_back(dflt);

    std::string text = emit_program(p);
    auto parsed = parse_program(text);
    REQUIRE(parsed.has_value());
    auto bs1 = assemble(p);
    auto bs2 = assemble(parsed.value());
    REQUIRE(bs1.has_value());
    REQUIRE(bs2.has_value());
    CHECK(bs1.value() == bs2.value());
    auto bs3 = assemble(parsed.value());
    CHECK(bs2.value() == bs3.value());
    CHECK(emit_program(parsed.value()) == text);
}

TEST_CASE("bitstream file round-trips with the fixed layout", "[microcode]") {
    FsmProgram p = all_nop_program();
    auto bs = assemble(p);
    REQUIRE(bs.has_value());
    std::string path = "test_bitstream.bit";
    bs.value().save(path);
    LutBitstream back = LutBitstream::load(path);
    CHECK(back == bs.value());
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    CHECK(f.tellg() == 1024 * 8);
    std::remove(path.c_str());
    // only the low 48 bits are significant
    for (uint64_t w : back.word) CHECK((w >> 48) == 0);
}
