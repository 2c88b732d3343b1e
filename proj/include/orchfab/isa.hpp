// isa.hpp - instruction word, opcodes, and the unified address space shared by
// data memory, scratchpad, router ports, and vector registers.
//
// Address map (16-bit raw):
//   0x0000-0x0FFF  data memory, byte offset
//   0x1000-0x103F  scratchpad, byte offset (16 vector words x 4 bytes)
//   0x1100-0x1103  router ports N,E,S,W
//   0x1200-0x1203  vector registers 0-3
//   0x1300         immediate operand (value rides the instruction's imm field)
//   0xFFFF         null (writes discarded, reads yield zero)
// Everything else decodes to Invalid.
#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "orchfab/common.hpp"

namespace orchfab {

constexpr int kSimdWidth = 4;          // vector lane count
constexpr int kDmemBytes = 4096;       // data memory per PE
constexpr int kSpadBytes = 64;         // scratchpad per PE
constexpr int kSpadEntries = 16;       // 64 B / one 4-byte vector word
constexpr int kPipelineDepth = 3;      // LOAD / COMPUTE / COMMIT

enum class RegionKind : uint8_t {
    DataMemory,
    Scratchpad,
    RouterPort,
    VReg,
    Immediate,
    Null,
    Invalid,
};

enum class Dir : uint8_t { N = 0, E = 1, S = 2, W = 3 };

inline const char* dir_name(Dir d) {
    switch (d) {
        case Dir::N: return "N";
        case Dir::E: return "E";
        case Dir::S: return "S";
        case Dir::W: return "W";
    }
    return "?";
}

struct Region {
    RegionKind kind = RegionKind::Invalid;
    uint16_t offset = 0;  // byte offset / port index / register index

    bool operator==(const Region&) const = default;
};

// 16-bit unified-space address.
struct Address {
    uint16_t raw = 0xFFFF;

    bool operator==(const Address&) const = default;

    static Address null() { return Address{0xFFFF}; }
    static Address dmem(uint16_t byte_off) { return Address{byte_off}; }
    static Address spad(uint16_t byte_off) { return Address{static_cast<uint16_t>(0x1000 + byte_off)}; }
    static Address port(Dir d) { return Address{static_cast<uint16_t>(0x1100 + static_cast<uint16_t>(d))}; }
    static Address vreg(uint16_t r) { return Address{static_cast<uint16_t>(0x1200 + r)}; }
    static Address imm() { return Address{0x1300}; }
};

// Total decode: every raw value maps to exactly one region (or Invalid).
inline Region decode_address(Address a) {
    uint16_t r = a.raw;
    if (r <= 0x0FFF) return {RegionKind::DataMemory, r};
    if (r >= 0x1000 && r <= 0x103F) return {RegionKind::Scratchpad, static_cast<uint16_t>(r - 0x1000)};
    if (r >= 0x1100 && r <= 0x1103) return {RegionKind::RouterPort, static_cast<uint16_t>(r - 0x1100)};
    if (r >= 0x1200 && r <= 0x1203) return {RegionKind::VReg, static_cast<uint16_t>(r - 0x1200)};
    if (r == 0x1300) return {RegionKind::Immediate, 0};
    if (r == 0xFFFF) return {RegionKind::Null, 0};
    return {RegionKind::Invalid, 0};
}

inline Expected<Address> encode_address(RegionKind kind, uint16_t offset) {
    switch (kind) {
        case RegionKind::DataMemory:
            if (offset >= kDmemBytes) return Err::InvalidAddress;
            return Address::dmem(offset);
        case RegionKind::Scratchpad:
            if (offset >= kSpadBytes) return Err::InvalidAddress;
            return Address::spad(offset);
        case RegionKind::RouterPort:
            if (offset >= 4) return Err::InvalidAddress;
            return Address::port(static_cast<Dir>(offset));
        case RegionKind::VReg:
            if (offset >= 4) return Err::InvalidAddress;
            return Address::vreg(offset);
        case RegionKind::Immediate:
            return Address::imm();
        case RegionKind::Null:
            return Address::null();
        default:
            return Err::InvalidAddress;
    }
}

enum class Opcode : uint8_t {
    NOP = 0,
    SVMAC = 1,  // res += scalar * vector, lane-wise
    VVMAC = 2,  // res += a (*) b, elementwise
    VVADD = 3,  // res = a + b
    VSUM = 4,   // scalar = sum of lanes(a)
    MOV = 5,    // copy / route
    HOLD = 6,   // spatial-mode latch
};

constexpr int kOpcodeCount = 7;

inline const char* opcode_name(Opcode op) {
    switch (op) {
        case Opcode::NOP: return "NOP";
        case Opcode::SVMAC: return "SVMAC";
        case Opcode::VVMAC: return "VVMAC";
        case Opcode::VVADD: return "VVADD";
        case Opcode::VSUM: return "VSUM";
        case Opcode::MOV: return "MOV";
        case Opcode::HOLD: return "HOLD";
    }
    return "?";
}

// Micro-flags carried in the high nibble of the op byte. They encode the
// router/memory side actions an FSM rule attaches to an instruction.
enum InstFlag : uint8_t {
    kFlagBypassNS = 0x1,   // router pass-through: consume N at LOAD, drive S at COMMIT
    kFlagSpadPop = 0x2,    // scratchpad FIFO pop: zero the slot read by op1, advance head
    kFlagAccInit = 0x4,    // accumulate from zero instead of the destination's old value
    kFlagReduceLast = 0x8, // in the final column, fold the result to a lane-0 scalar before commit
};

struct Instruction {
    Opcode op = Opcode::NOP;
    uint8_t flags = 0;
    Address op1 = Address::null();
    Address op2 = Address::null();
    Address res = Address::null();
    int32_t imm = 0;
    bool valid = true;

    bool operator==(const Instruction&) const = default;

    static Instruction nop() { return Instruction{}; }
};

inline bool region_readable(RegionKind k) {
    switch (k) {
        case RegionKind::DataMemory:
        case RegionKind::Scratchpad:
        case RegionKind::RouterPort:
        case RegionKind::VReg:
        case RegionKind::Immediate:
        case RegionKind::Null:
            return true;
        default:
            return false;
    }
}

inline bool region_writable(RegionKind k) {
    switch (k) {
        case RegionKind::DataMemory:
        case RegionKind::Scratchpad:
        case RegionKind::RouterPort:
        case RegionKind::VReg:
        case RegionKind::Null:
            return true;
        default:
            return false;
    }
}

// Static legality of a single instruction, independent of any machine state.
// Covers readable/writable regions, the SVMAC scalar-source rule, and the
// router rule: an instruction never both reads and writes the same port
// direction (bypass reads N and writes S, so those count too).
inline Expected<bool> validate_instruction(const Instruction& in) {
    Region r1 = decode_address(in.op1);
    Region r2 = decode_address(in.op2);
    Region rr = decode_address(in.res);
    if (r1.kind == RegionKind::Invalid || r2.kind == RegionKind::Invalid || rr.kind == RegionKind::Invalid)
        return Err::InvalidAddress;
    if (!region_readable(r1.kind) || !region_readable(r2.kind)) return Err::InvalidAddress;
    if (!region_writable(rr.kind)) return Err::InvalidAddress;

    if (in.op == Opcode::SVMAC) {
        if (r1.kind != RegionKind::Immediate) return Err::OperandShape;
        if (r2.kind == RegionKind::Immediate) return Err::OperandShape;
    }

    bool port_read[4] = {false, false, false, false};
    int port_write[4] = {0, 0, 0, 0};
    if (r1.kind == RegionKind::RouterPort) port_read[r1.offset] = true;
    if (r2.kind == RegionKind::RouterPort) port_read[r2.offset] = true;
    if (rr.kind == RegionKind::RouterPort) port_write[rr.offset]++;
    if (in.flags & kFlagBypassNS) {
        port_read[static_cast<int>(Dir::N)] = true;
        port_write[static_cast<int>(Dir::S)]++;
    }
    for (int d = 0; d < 4; ++d)
        if ((port_read[d] && port_write[d]) || port_write[d] > 1) return Err::RouterConflict;
    return true;
}

// 88-bit packed form: op byte (flags<<4 | opcode), three 16-bit addresses,
// 32-bit immediate. Dumped as 22 lowercase hex digits, one per trace line.
struct PackedInstruction {
    uint32_t hi = 0;  // bits 87..64: op byte + op1
    uint64_t lo = 0;  // bits 63..0: op2, res, imm

    bool operator==(const PackedInstruction&) const = default;
};

inline PackedInstruction pack_instruction(const Instruction& in) {
    PackedInstruction p;
    uint8_t opbyte = static_cast<uint8_t>((in.flags << 4) | static_cast<uint8_t>(in.op));
    p.hi = (static_cast<uint32_t>(opbyte) << 16) | in.op1.raw;
    p.lo = (static_cast<uint64_t>(in.op2.raw) << 48) | (static_cast<uint64_t>(in.res.raw) << 32) |
           static_cast<uint32_t>(in.imm);
    return p;
}

inline Expected<Instruction> unpack_instruction(const PackedInstruction& p) {
    uint8_t opbyte = static_cast<uint8_t>((p.hi >> 16) & 0xFF);
    uint8_t opc = opbyte & 0x0F;
    if (opc >= kOpcodeCount) return Err::MalformedInstruction;
    Instruction in;
    in.op = static_cast<Opcode>(opc);
    in.flags = opbyte >> 4;
    in.op1.raw = static_cast<uint16_t>(p.hi & 0xFFFF);
    in.op2.raw = static_cast<uint16_t>((p.lo >> 48) & 0xFFFF);
    in.res.raw = static_cast<uint16_t>((p.lo >> 32) & 0xFFFF);
    in.imm = static_cast<int32_t>(p.lo & 0xFFFFFFFFu);
    return in;
}

inline std::string to_hex(const PackedInstruction& p) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%06x%016llx", p.hi & 0xFFFFFF, static_cast<unsigned long long>(p.lo));
    return std::string(buf);
}

inline Expected<PackedInstruction> from_hex(const std::string& s) {
    if (s.size() != 22) return Err::ParseError;
    for (char c : s)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return Err::ParseError;
    PackedInstruction p;
    p.hi = static_cast<uint32_t>(std::stoul(s.substr(0, 6), nullptr, 16));
    p.lo = std::stoull(s.substr(6), nullptr, 16);
    return p;
}

inline std::string disassemble(const Instruction& in) {
    auto addr_str = [](Address a) -> std::string {
        Region r = decode_address(a);
        switch (r.kind) {
            case RegionKind::DataMemory: return "dmem[" + std::to_string(r.offset) + "]";
            case RegionKind::Scratchpad: return "spad[" + std::to_string(r.offset) + "]";
            case RegionKind::RouterPort: return std::string("port.") + dir_name(static_cast<Dir>(r.offset));
            case RegionKind::VReg: return "v" + std::to_string(r.offset);
            case RegionKind::Immediate: return "imm";
            case RegionKind::Null: return "null";
            default: return "invalid";
        }
    };
    std::string s = opcode_name(in.op);
    s += " " + addr_str(in.op1) + " " + addr_str(in.op2) + " -> " + addr_str(in.res);
    if (decode_address(in.op1).kind == RegionKind::Immediate || decode_address(in.op2).kind == RegionKind::Immediate)
        s += " #" + std::to_string(in.imm);
    if (in.flags & kFlagBypassNS) s += " +bypass";
    if (in.flags & kFlagSpadPop) s += " +pop";
    if (in.flags & kFlagAccInit) s += " +init";
    if (in.flags & kFlagReduceLast) s += " +reduce";
    return s;
}

}  // namespace orchfab
