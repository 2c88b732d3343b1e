// microcode.hpp - symbolic FSM program representation, the assembler to the
// 1024x48-bit LUT bitstream, a direct interpreter, and the equivalence
// checker between the two.
//
// LUT input index, 10 bits: state(3) | input_tag(3) | msg_id(2) | cond(2).
// LUT output word, 48 bits, packed MSB-first within the low 48 bits:
//   next_state(3) opcode(4) op1_sel(4) op2_sel(4) res_sel(4) addr_mode(4)
//   msg_out_id(2) msg_payload_sel(3) meta_action(4) valid(1) reserved(15)
// The addr_mode field selects an address-expression bundle and carries the
// router/memory micro-flags (bypass, pop, init, reduce) attached to the rule.
#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "orchfab/isa.hpp"

namespace orchfab {

constexpr int kLutEntries = 1024;
constexpr int kMaxStates = 8;
constexpr int kMaxTags = 8;
constexpr int kMaxMsgIds = 4;

// Operand selectors for the three address fields.
enum class OpSel : uint8_t {
    Null = 0,
    Imm = 1,
    Dmem = 2,   // address from the mode's dmem expression
    Spad = 3,   // address from the mode's spad expression (source or dest side)
    PortN = 4,
    PortE = 5,
    PortS = 6,
    PortW = 7,
    V0 = 8,
    V1 = 9,
    V2 = 10,
    V3 = 11,
};

// Address-generation bundles. Expressions draw on the stream token (rid,
// cid), the north message, the meta registers, and program constants.
enum class AddrMode : uint8_t {
    None = 0,
    SpmmMac = 1,       // dmem=(cid mod c1)*V   spad=(rid mod cap)
    SpmmMacByp = 2,    // SpmmMac + bypass
    SpmmAcc = 3,       // spad=(msg.rid mod cap), both source and dest
    SpmmFlush = 4,     // spad=(rid_start mod cap) source + pop
    SpmmBank = 5,      // spad=(rid mod cap), source == dest
    NmMac = 6,         // dmem=(cid mod c1), accumulate in a vreg
    NmMacByp = 7,      //   + bypass
    NmMacInit = 8,     //   + fresh accumulator
    NmMacInitByp = 9,  //   + both
    ChunkIn = 10,      // spad=(chunk_w slot) dest + bypass (store and forward)
    BlkMacInit = 11,   // spad=((set_base+blk_w) mod cap) src, dmem=((cid+win_i)*wc+blk_w)*V, + init
    BlkMac = 12,       //   without init
    ChainReduce = 13,  // + reduce-at-last-column
};

enum class MsgPayloadSel : uint8_t {
    None = 0,
    Relay = 1,     // incoming message's row id
    RidStart = 2,  // oldest managed row id
    CurRid = 3,    // row currently streaming
    TokenRid = 4,  // row id of the head token
};

// State-meta update bundles; each also decides whether the head token is
// consumed this cycle.
enum class MetaAction : uint8_t {
    None = 0,           // no change, token stays
    Consume = 1,        // token consumed, no meta change
    MacExtend = 2,      // consume; grow the managed window to cover token.rid
    RowEndBank = 3,     // consume; bank the finished row, window grows
    RowEndEvict = 4,    // consume; bank + evict the oldest row
    DrainPop = 5,       // no token; evict the oldest row
    GroupInc = 6,       // consume; count a group element
    GroupFlush = 7,     // no token; group counter resets
    GroupFlushRowAdv = 8,  // consume row end; group counter resets, row advances
    RowAdv = 9,         // consume row end
    ChunkArrive = 10,   // consume; chunk ring advances
    BlkStep = 11,       // no token; block position advances
    BlkDone = 12,       // consume; block and window-row counters reset
    BlkDoneNext = 13,   // no token; next window row
    SetEnd = 14,        // consume; chunk-set ring base advances
};

// Statically wired condition predicates (two per program).
enum class CondKind : uint8_t {
    False = 0,
    ManagedWindow = 1,  // PSum message and msg.rid inside [rid_start, rid_start+buf_len)
    MsgCurRow = 2,      // PSum message and msg.rid == cur_rid
    EvictOrDrain = 3,   // at RowEnd: window would hit capacity; at EOS: window nonempty
    GroupLast = 4,      // group counter at nflush-1
    BlkLast = 5,        // block position at wc-1
    WinLast = 6,        // window-row counter at token.value-1
};

// Decoded 48-bit LUT output.
struct LutEntry {
    uint8_t next_state = 0;
    uint8_t opcode = 0;  // 0xF = IllegalTransition sentinel
    OpSel op1 = OpSel::Null;
    OpSel op2 = OpSel::Null;
    OpSel res = OpSel::Null;
    AddrMode mode = AddrMode::None;
    uint8_t msg_out = 0;
    MsgPayloadSel payload = MsgPayloadSel::None;
    MetaAction action = MetaAction::None;
    bool valid = false;

    bool operator==(const LutEntry&) const = default;

    uint64_t pack() const {
        uint64_t w = 0;
        w |= (static_cast<uint64_t>(next_state) & 0x7) << 45;
        w |= (static_cast<uint64_t>(opcode) & 0xF) << 41;
        w |= (static_cast<uint64_t>(op1) & 0xF) << 37;
        w |= (static_cast<uint64_t>(op2) & 0xF) << 33;
        w |= (static_cast<uint64_t>(res) & 0xF) << 29;
        w |= (static_cast<uint64_t>(mode) & 0xF) << 25;
        w |= (static_cast<uint64_t>(msg_out) & 0x3) << 23;
        w |= (static_cast<uint64_t>(payload) & 0x7) << 20;
        w |= (static_cast<uint64_t>(action) & 0xF) << 16;
        w |= (static_cast<uint64_t>(valid ? 1 : 0)) << 15;
        return w;
    }

    static LutEntry unpack(uint64_t w) {
        LutEntry e;
        e.next_state = (w >> 45) & 0x7;
        e.opcode = (w >> 41) & 0xF;
        e.op1 = static_cast<OpSel>((w >> 37) & 0xF);
        e.op2 = static_cast<OpSel>((w >> 33) & 0xF);
        e.res = static_cast<OpSel>((w >> 29) & 0xF);
        e.mode = static_cast<AddrMode>((w >> 25) & 0xF);
        e.msg_out = (w >> 23) & 0x3;
        e.payload = static_cast<MsgPayloadSel>((w >> 20) & 0x7);
        e.action = static_cast<MetaAction>((w >> 16) & 0xF);
        e.valid = (w >> 15) & 0x1;
        return e;
    }

    static LutEntry illegal() {
        LutEntry e;
        e.opcode = 0xF;
        return e;
    }
    bool is_illegal() const { return opcode == 0xF || !valid; }
};

inline int lut_index(int state, int tag, int msg, bool c0, bool c1) {
    return ((state & 0x7) << 7) | ((tag & 0x7) << 4) | ((msg & 0x3) << 2) | ((c0 ? 1 : 0) << 1) |
           (c1 ? 1 : 0);
}

struct LutBitstream {
    std::array<uint64_t, kLutEntries> word{};

    bool operator==(const LutBitstream&) const = default;

    LutEntry entry(int idx) const { return LutEntry::unpack(word[idx]); }

    // File form: 1024 little-endian 64-bit words, low 48 bits significant.
    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw SimError(Err::IoError, "cannot write " + path);
        for (uint64_t w : word) {
            uint8_t b[8];
            for (int i = 0; i < 8; ++i) b[i] = (w >> (8 * i)) & 0xFF;
            f.write(reinterpret_cast<const char*>(b), 8);
        }
    }

    static LutBitstream load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw SimError(Err::IoError, "cannot read " + path);
        LutBitstream bs;
        for (auto& w : bs.word) {
            uint8_t b[8];
            f.read(reinterpret_cast<char*>(b), 8);
            if (!f) throw SimError(Err::IoError, "short bitstream file " + path);
            w = 0;
            for (int i = 0; i < 8; ++i) w |= static_cast<uint64_t>(b[i]) << (8 * i);
        }
        return bs;
    }
};

// Constants the plan bakes into a program instance.
struct OrchConsts {
    int c1 = 1;      // data-memory rows held per PE (H)
    int cap = 16;    // scratchpad window capacity in entries
    int wc = 1;      // chunks per set / MACs per block (W)
    int nflush = 0;  // flush period for structured flows (N), 0 when unused
};

// One symbolic rule: a match pattern with wildcards plus the outputs.
struct FsmRule {
    int state = -1;  // -1 = wildcard
    int tag = -1;
    int msg = -1;
    int cond0 = -1;  // -1 wildcard, else 0/1
    int cond1 = -1;

    Opcode op = Opcode::NOP;
    OpSel op1 = OpSel::Null;
    OpSel op2 = OpSel::Null;
    OpSel res = OpSel::Null;
    AddrMode mode = AddrMode::None;
    int msg_out = 0;
    MsgPayloadSel payload = MsgPayloadSel::None;
    MetaAction action = MetaAction::None;
    int next_state = 0;  // kSameState keeps the matched state
    int line = 0;

    static constexpr int kSameState = -2;

    bool matches(int s, int t, int m, int c0, int c1v) const {
        return (state < 0 || state == s) && (tag < 0 || tag == t) && (msg < 0 || msg == m) &&
               (cond0 < 0 || cond0 == c0) && (cond1 < 0 || cond1 == c1v);
    }
};

struct FsmProgram {
    std::string name;
    std::vector<std::string> states;
    std::vector<std::string> tags;  // tag 0 is conventionally NONE
    std::vector<std::string> msgs;  // msg 0 is conventionally NONE
    int eos_tag = -1;
    int rowend_tag = -1;
    CondKind cond0 = CondKind::False;
    CondKind cond1 = CondKind::False;
    OrchConsts consts;
    std::vector<FsmRule> rules;

    int state_id(const std::string& n) const { return find_name(states, n); }
    int tag_id(const std::string& n) const { return find_name(tags, n); }
    int msg_id(const std::string& n) const { return find_name(msgs, n); }

    static int find_name(const std::vector<std::string>& v, const std::string& n) {
        for (size_t i = 0; i < v.size(); ++i)
            if (v[i] == n) return static_cast<int>(i);
        return -1;
    }
};

inline Expected<bool> validate_program(const FsmProgram& p) {
    if (p.states.empty() || p.states.size() > kMaxStates) return Err::TooManyStates;
    if (p.tags.empty() || p.tags.size() > kMaxTags) return Err::TooManyTags;
    if (p.msgs.empty() || p.msgs.size() > kMaxMsgIds) return Err::TooManyMsgIds;
    for (size_t i = 0; i < p.rules.size(); ++i) {
        const FsmRule& r = p.rules[i];
        if (r.state >= static_cast<int>(p.states.size()) || r.tag >= static_cast<int>(p.tags.size()) ||
            r.msg >= static_cast<int>(p.msgs.size()))
            return Err::ParseError;
        if (r.next_state != FsmRule::kSameState &&
            (r.next_state < 0 || r.next_state >= static_cast<int>(p.states.size())))
            return Err::ParseError;
        if (r.msg_out >= static_cast<int>(p.msgs.size())) return Err::ParseError;
        // Rules use first-match priority; two rules with the same explicit
        // pattern make the later one dead, which is a program bug.
        for (size_t j = 0; j < i; ++j) {
            const FsmRule& q = p.rules[j];
            if (q.state == r.state && q.tag == r.tag && q.msg == r.msg && q.cond0 == r.cond0 &&
                q.cond1 == r.cond1)
                return Err::AmbiguousRules;
        }
    }
    return true;
}

// Symbolic lookup: the interpreter-side semantics of one LUT index. Every
// index outside the declared alphabets, or matching no rule, is the
// IllegalTransition sentinel.
inline LutEntry interpret_step(const FsmProgram& p, int state, int tag, int msg, bool c0, bool c1) {
    if (state >= static_cast<int>(p.states.size()) || tag >= static_cast<int>(p.tags.size()) ||
        msg >= static_cast<int>(p.msgs.size()))
        return LutEntry::illegal();
    for (const FsmRule& r : p.rules) {
        if (!r.matches(state, tag, msg, c0 ? 1 : 0, c1 ? 1 : 0)) continue;
        LutEntry e;
        e.next_state = static_cast<uint8_t>(r.next_state == FsmRule::kSameState ? state : r.next_state);
        e.opcode = static_cast<uint8_t>(r.op);
        e.op1 = r.op1;
        e.op2 = r.op2;
        e.res = r.res;
        e.mode = r.mode;
        e.msg_out = static_cast<uint8_t>(r.msg_out);
        e.payload = r.payload;
        e.action = r.action;
        e.valid = true;
        return e;
    }
    return LutEntry::illegal();
}

inline LutEntry interpret_index(const FsmProgram& p, int idx) {
    return interpret_step(p, (idx >> 7) & 0x7, (idx >> 4) & 0x7, (idx >> 2) & 0x3, (idx >> 1) & 1,
                          idx & 1);
}

inline Expected<LutBitstream> assemble(const FsmProgram& p) {
    auto ok = validate_program(p);
    if (!ok) return ok.error();
    LutBitstream bs;
    for (int idx = 0; idx < kLutEntries; ++idx) bs.word[idx] = interpret_index(p, idx).pack();
    return bs;
}

// Full cross-product check between the symbolic program and a bitstream.
// Returns the mismatching indices (empty on success).
inline std::vector<int> verify_equivalence(const FsmProgram& p, const LutBitstream& bs) {
    std::vector<int> bad;
    for (int idx = 0; idx < kLutEntries; ++idx)
        if (interpret_index(p, idx).pack() != bs.word[idx]) bad.push_back(idx);
    return bad;
}

// ---------------------------------------------------------------------------
// Text format: line oriented, '#' comments.
//
//   program <name>
//   states <n0> <n1> ...
//   tags <n0> ...            (tag 0 = idle/none)
//   msgs <n0> ...
//   eos <tag-name>           (optional)
//   rowend <tag-name>        (optional)
//   cond0 <predicate>        cond1 <predicate>
//   const <c1|cap|wc|nflush> <int>
//   rule <state|*> <tag|*> <msg|*> <0|1|*> <0|1|*> ->
//     op=<opcode> op1=<sel> op2=<sel> res=<sel> mode=<mode>
//     msg=<msg|-> pay=<payload> act=<action> next=<state|same>
// ---------------------------------------------------------------------------

namespace detail {

inline const std::map<std::string, OpSel>& opsel_names() {
    static const std::map<std::string, OpSel> m = {
        {"null", OpSel::Null}, {"imm", OpSel::Imm},   {"dmem", OpSel::Dmem}, {"spad", OpSel::Spad},
        {"n", OpSel::PortN},   {"e", OpSel::PortE},   {"s", OpSel::PortS},   {"w", OpSel::PortW},
        {"v0", OpSel::V0},     {"v1", OpSel::V1},     {"v2", OpSel::V2},     {"v3", OpSel::V3},
    };
    return m;
}

inline const std::map<std::string, AddrMode>& mode_names() {
    static const std::map<std::string, AddrMode> m = {
        {"none", AddrMode::None},
        {"spmm_mac", AddrMode::SpmmMac},
        {"spmm_mac_byp", AddrMode::SpmmMacByp},
        {"spmm_acc", AddrMode::SpmmAcc},
        {"spmm_flush", AddrMode::SpmmFlush},
        {"spmm_bank", AddrMode::SpmmBank},
        {"nm_mac", AddrMode::NmMac},
        {"nm_mac_byp", AddrMode::NmMacByp},
        {"nm_mac_init", AddrMode::NmMacInit},
        {"nm_mac_init_byp", AddrMode::NmMacInitByp},
        {"chunk_in", AddrMode::ChunkIn},
        {"blk_mac_init", AddrMode::BlkMacInit},
        {"blk_mac", AddrMode::BlkMac},
        {"chain_reduce", AddrMode::ChainReduce},
    };
    return m;
}

inline const std::map<std::string, MetaAction>& action_names() {
    static const std::map<std::string, MetaAction> m = {
        {"none", MetaAction::None},
        {"consume", MetaAction::Consume},
        {"mac_extend", MetaAction::MacExtend},
        {"rowend_bank", MetaAction::RowEndBank},
        {"rowend_evict", MetaAction::RowEndEvict},
        {"drain_pop", MetaAction::DrainPop},
        {"group_inc", MetaAction::GroupInc},
        {"group_flush", MetaAction::GroupFlush},
        {"group_flush_rowadv", MetaAction::GroupFlushRowAdv},
        {"rowadv", MetaAction::RowAdv},
        {"chunk_arrive", MetaAction::ChunkArrive},
        {"blk_step", MetaAction::BlkStep},
        {"blk_done", MetaAction::BlkDone},
        {"blk_done_next", MetaAction::BlkDoneNext},
        {"set_end", MetaAction::SetEnd},
    };
    return m;
}

inline const std::map<std::string, MsgPayloadSel>& payload_names() {
    static const std::map<std::string, MsgPayloadSel> m = {
        {"none", MsgPayloadSel::None},       {"relay", MsgPayloadSel::Relay},
        {"rid_start", MsgPayloadSel::RidStart}, {"cur_rid", MsgPayloadSel::CurRid},
        {"token_rid", MsgPayloadSel::TokenRid},
    };
    return m;
}

inline const std::map<std::string, CondKind>& cond_names() {
    static const std::map<std::string, CondKind> m = {
        {"false", CondKind::False},
        {"managed_window", CondKind::ManagedWindow},
        {"msg_cur_row", CondKind::MsgCurRow},
        {"evict_or_drain", CondKind::EvictOrDrain},
        {"group_last", CondKind::GroupLast},
        {"blk_last", CondKind::BlkLast},
        {"win_last", CondKind::WinLast},
    };
    return m;
}

inline const std::map<std::string, Opcode>& opcode_names() {
    static const std::map<std::string, Opcode> m = {
        {"nop", Opcode::NOP},   {"svmac", Opcode::SVMAC}, {"vvmac", Opcode::VVMAC},
        {"vvadd", Opcode::VVADD}, {"vsum", Opcode::VSUM},  {"mov", Opcode::MOV},
        {"hold", Opcode::HOLD},
    };
    return m;
}

template <typename T>
inline Expected<T> lookup(const std::map<std::string, T>& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) return Err::ParseError;
    return it->second;
}

template <typename T>
inline std::string rlookup(const std::map<std::string, T>& m, T v) {
    for (const auto& [k, x] : m)
        if (x == v) return k;
    return "?";
}

}  // namespace detail

inline Expected<FsmProgram> parse_program(const std::string& text) {
    FsmProgram p;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::string pending_eos, pending_rowend;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw == "program") {
            ls >> p.name;
        } else if (kw == "states" || kw == "tags" || kw == "msgs") {
            std::vector<std::string>& v = kw == "states" ? p.states : (kw == "tags" ? p.tags : p.msgs);
            std::string n;
            while (ls >> n) v.push_back(n);
        } else if (kw == "eos") {
            ls >> pending_eos;
        } else if (kw == "rowend") {
            ls >> pending_rowend;
        } else if (kw == "cond0" || kw == "cond1") {
            std::string n;
            ls >> n;
            auto c = detail::lookup(detail::cond_names(), n);
            if (!c) return Err::ParseError;
            (kw == "cond0" ? p.cond0 : p.cond1) = *c;
        } else if (kw == "const") {
            std::string n;
            long v;
            if (!(ls >> n >> v)) return Err::ParseError;
            if (n == "c1") p.consts.c1 = static_cast<int>(v);
            else if (n == "cap") p.consts.cap = static_cast<int>(v);
            else if (n == "wc") p.consts.wc = static_cast<int>(v);
            else if (n == "nflush") p.consts.nflush = static_cast<int>(v);
            else return Err::ParseError;
        } else if (kw == "rule") {
            FsmRule r;
            r.line = lineno;
            std::string fs, ft, fm, f0, f1, arrow;
            if (!(ls >> fs >> ft >> fm >> f0 >> f1 >> arrow) || arrow != "->") return Err::ParseError;
            auto idof = [](const std::vector<std::string>& v, const std::string& n) {
                return FsmProgram::find_name(v, n);
            };
            if (fs != "*") { r.state = idof(p.states, fs); if (r.state < 0) return Err::ParseError; }
            if (ft != "*") { r.tag = idof(p.tags, ft); if (r.tag < 0) return Err::ParseError; }
            if (fm != "*") { r.msg = idof(p.msgs, fm); if (r.msg < 0) return Err::ParseError; }
            if (f0 != "*") r.cond0 = (f0 == "1");
            if (f1 != "*") r.cond1 = (f1 == "1");
            std::string kv;
            bool have_next = false;
            while (ls >> kv) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) return Err::ParseError;
                std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
                if (key == "op") {
                    auto v = detail::lookup(detail::opcode_names(), val);
                    if (!v) return Err::ParseError;
                    r.op = *v;
                } else if (key == "op1" || key == "op2" || key == "res") {
                    auto v = detail::lookup(detail::opsel_names(), val);
                    if (!v) return Err::ParseError;
                    (key == "op1" ? r.op1 : key == "op2" ? r.op2 : r.res) = *v;
                } else if (key == "mode") {
                    auto v = detail::lookup(detail::mode_names(), val);
                    if (!v) return Err::ParseError;
                    r.mode = *v;
                } else if (key == "msg") {
                    if (val == "-") r.msg_out = 0;
                    else {
                        int id = FsmProgram::find_name(p.msgs, val);
                        if (id < 0) return Err::ParseError;
                        r.msg_out = id;
                    }
                } else if (key == "pay") {
                    auto v = detail::lookup(detail::payload_names(), val);
                    if (!v) return Err::ParseError;
                    r.payload = *v;
                } else if (key == "act") {
                    auto v = detail::lookup(detail::action_names(), val);
                    if (!v) return Err::ParseError;
                    r.action = *v;
                } else if (key == "next") {
                    if (val == "same") r.next_state = FsmRule::kSameState;
                    else {
                        r.next_state = FsmProgram::find_name(p.states, val);
                        if (r.next_state < 0) return Err::ParseError;
                    }
                    have_next = true;
                } else {
                    return Err::ParseError;
                }
            }
            if (!have_next) return Err::ParseError;
            p.rules.push_back(r);
        } else {
            return Err::ParseError;
        }
    }
    if (!pending_eos.empty()) {
        p.eos_tag = p.tag_id(pending_eos);
        if (p.eos_tag < 0) return Err::ParseError;
    }
    if (!pending_rowend.empty()) {
        p.rowend_tag = p.tag_id(pending_rowend);
        if (p.rowend_tag < 0) return Err::ParseError;
    }
    auto ok = validate_program(p);
    if (!ok) return ok.error();
    return p;
}

inline std::string emit_program(const FsmProgram& p) {
    std::ostringstream out;
    out << "program " << p.name << "\n";
    auto emit_list = [&](const char* kw, const std::vector<std::string>& v) {
        out << kw;
        for (const auto& n : v) out << " " << n;
        out << "\n";
    };
    emit_list("states", p.states);
    emit_list("tags", p.tags);
    emit_list("msgs", p.msgs);
    if (p.eos_tag >= 0) out << "eos " << p.tags[p.eos_tag] << "\n";
    if (p.rowend_tag >= 0) out << "rowend " << p.tags[p.rowend_tag] << "\n";
    out << "cond0 " << detail::rlookup(detail::cond_names(), p.cond0) << "\n";
    out << "cond1 " << detail::rlookup(detail::cond_names(), p.cond1) << "\n";
    out << "const c1 " << p.consts.c1 << "\n";
    out << "const cap " << p.consts.cap << "\n";
    out << "const wc " << p.consts.wc << "\n";
    out << "const nflush " << p.consts.nflush << "\n";
    for (const FsmRule& r : p.rules) {
        auto pat = [&](int v, const std::vector<std::string>& names) {
            return v < 0 ? std::string("*") : names[v];
        };
        auto cond = [](int v) { return v < 0 ? std::string("*") : std::to_string(v); };
        out << "rule " << pat(r.state, p.states) << " " << pat(r.tag, p.tags) << " "
            << pat(r.msg, p.msgs) << " " << cond(r.cond0) << " " << cond(r.cond1) << " ->"
            << " op=" << detail::rlookup(detail::opcode_names(), r.op)
            << " op1=" << detail::rlookup(detail::opsel_names(), r.op1)
            << " op2=" << detail::rlookup(detail::opsel_names(), r.op2)
            << " res=" << detail::rlookup(detail::opsel_names(), r.res)
            << " mode=" << detail::rlookup(detail::mode_names(), r.mode)
            << " msg=" << (r.msg_out == 0 ? std::string("-") : p.msgs[r.msg_out])
            << " pay=" << detail::rlookup(detail::payload_names(), r.payload)
            << " act=" << detail::rlookup(detail::action_names(), r.action)
            << " next=" << (r.next_state == FsmRule::kSameState ? std::string("same") : p.states[r.next_state])
            << "\n";
    }
    return out.str();
}

}  // namespace orchfab
