// fabric.hpp - the X x Y PE array, circuit-switched data NoC, staggered
// instruction network, per-row orchestrators, edge feeders/collectors, and
// the global cycle engine.
//
// Timing contract, all verified at runtime:
//   - an instruction issued to a row at cycle t reaches PE x's LOAD at t+3x;
//   - a value committed onto a port at cycle c is on the neighbor's input at
//     c+1, and is consumed exactly there (rendezvous) or lost;
//   - an inter-orchestrator message emitted at issue cycle t is delivered to
//     the southern neighbor one cycle later and becomes actionable to its
//     FSM at t+3, which makes the reacting row's LOAD-from-N line up with
//     the psum wavefront for every PE of the row.
#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <vector>

#include "orchfab/metrics.hpp"
#include "orchfab/orchestrator.hpp"
#include "orchfab/pe.hpp"

namespace orchfab {

struct FabricConfig {
    int x_dim = 8;
    int y_dim = 8;
    int simd_width = kSimdWidth;
    int dmem_bytes = kDmemBytes;
    int spad_entries = kSpadEntries;  // 1..16, effective FIFO window capacity
    int pipeline_depth = kPipelineDepth;
    double offchip_bw_bytes_per_cycle = 17.0;
    long long max_cycles = 50'000'000;
    bool use_lut = true;       // execute orchestrators from the assembled bitstream
    bool record_traces = false;
    int trace_verbosity = 0;

    void validate() const {
        if (x_dim <= 0 || y_dim <= 0) throw SimError(Err::DegenerateShape, "fabric dims must be positive");
        if (simd_width != kSimdWidth) throw SimError(Err::DegenerateShape, "simd width is fixed at 4");
        if (dmem_bytes != kDmemBytes) throw SimError(Err::DegenerateShape, "dmem is fixed at 4096 bytes");
        if (spad_entries < 1 || spad_entries > kSpadEntries)
            throw SimError(Err::DegenerateShape, "spad entries must be in 1..16");
        if (pipeline_depth != kPipelineDepth)
            throw SimError(Err::DegenerateShape, "pipeline depth is fixed at 3");
    }
};

// Conservation bookkeeping for psum packets travelling south.
struct PacketStats {
    uint64_t injected = 0;
    uint64_t absorbed = 0;
    uint64_t collected = 0;
};

enum class SouthEdgeMode { PsumByRid, Discard };

class Fabric {
public:
    explicit Fabric(const FabricConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        pes_.resize(cfg_.x_dim * cfg_.y_dim);
        for (int y = 0; y < cfg_.y_dim; ++y)
            for (int x = 0; x < cfg_.x_dim; ++x) {
                PeState& pe = pes_[pe_index(x, y)];
                pe.x = x;
                pe.y = y;
                pe.last_col = x == cfg_.x_dim - 1;
                pe.spad_cap = cfg_.spad_entries;
            }
        rows_.resize(cfg_.y_dim);
        ports_now_.resize(pes_.size());
        ports_next_.resize(pes_.size());
        incoming_now_.assign(pes_.size(), Instruction{.valid = false});
        incoming_next_.assign(pes_.size(), Instruction{.valid = false});
        north_feed_.resize(cfg_.x_dim);
        west_feed_.resize(cfg_.y_dim);
        south_values_.resize(cfg_.x_dim);
        south_expect_.resize(cfg_.x_dim);
        east_values_.resize(cfg_.y_dim);
        issue_ring_.assign(cfg_.y_dim, std::vector<PackedInstruction>(ring_size(), PackedInstruction{}));
        for (auto& r : rows_) r.regs = OrchRegisters{};
        if (cfg_.record_traces) traces_.resize(pes_.size());
    }

    const FabricConfig& config() const { return cfg_; }
    long long cycle() const { return cycle_; }
    int pe_index(int x, int y) const { return y * cfg_.x_dim + x; }
    PeState& pe(int x, int y) { return pes_[pe_index(x, y)]; }
    const PeState& pe(int x, int y) const { return pes_[pe_index(x, y)]; }

    // --- programming interface ---------------------------------------------

    void set_row_program(int y, std::shared_ptr<const CompiledProgram> prog,
                         std::vector<StreamToken> stream, long long start_cycle = 0) {
        RowState& r = rows_[y];
        r.prog = std::move(prog);
        r.stream = std::move(stream);
        r.cursor = 0;
        r.start_cycle = start_cycle;
        r.regs = OrchRegisters{};
    }

    void load_dmem(int x, int y, int offset, const std::vector<int8_t>& bytes) {
        PeState& p = pe(x, y);
        if (offset + static_cast<int>(bytes.size()) > cfg_.dmem_bytes)
            throw SimError(Err::InvalidAddress, "dmem image too large");
        for (size_t i = 0; i < bytes.size(); ++i) p.dmem[offset + i] = bytes[i];
    }

    void feed_north(int x, VecWord v) { north_feed_[x].push_back(v); }
    void feed_west(int y, VecWord v) { west_feed_[y].push_back(v); }
    void set_south_mode(SouthEdgeMode m) { south_mode_ = m; }
    void set_event_log(std::ostream* os) { event_log_ = os; }

    // --- collected outputs ---------------------------------------------------

    // Per column, psums delivered off the bottom edge, tagged with their row id.
    const std::vector<std::vector<std::pair<int64_t, VecWord>>>& south_collected() const {
        return south_values_;
    }
    // Per fabric row, values delivered off the east edge in arrival order.
    const std::vector<std::vector<VecWord>>& east_collected() const { return east_values_; }

    const PacketStats& packet_stats() const { return packets_; }
    uint64_t staggered_violations() const { return staggered_violations_; }

    Metrics metrics() const {
        Metrics m = metrics_;
        long long span = last_active_cycle_ + 1;
        if (span < 0) span = 0;
        m.cycles = static_cast<uint64_t>(span);
        m.total_lane_cycles = static_cast<uint64_t>(span) * pes_.size();
        for (const PeState& p : pes_) {
            m.active_lane_cycles += p.counters.active_cycles;
            m.spad_reads += p.counters.spad_reads;
            m.spad_writes += p.counters.spad_writes;
            m.dmem_reads += p.counters.dmem_reads;
            m.dmem_writes += p.counters.dmem_writes;
            m.mult_lane_ops += p.counters.mult_lane_ops;
        }
        for (const RowState& r : rows_) m.fsm_transitions += r.transitions;
        return m;
    }

    // Per-PE executed-instruction trace (record_traces must be on).
    std::vector<std::pair<long long, Instruction>> staggered_trace(int row, int pe_x) const {
        if (!cfg_.record_traces)
            throw SimError(Err::IoError, "trace recording disabled for this run");
        return traces_[pe_index(pe_x, row)];
    }

    // --- cycle engine --------------------------------------------------------

    // Runs until the fabric is quiescent: streams drained, pipelines empty,
    // no values or messages in flight, and a few confirming idle cycles.
    // Returns the cycle count of the active span.
    long long run() {
        while (idle_streak_ < 4) {
            if (cycle_ >= cfg_.max_cycles)
                throw SimError(Err::Timeout, "fabric did not quiesce", cycle_);
            fabric_tick();
        }
        finish_checks();
        return last_active_cycle_ + 1;
    }

    void fabric_tick() {
        std::swap(ports_now_, ports_next_);
        for (auto& f : ports_next_) f = PortFrame{};
        std::swap(incoming_now_, incoming_next_);
        for (auto& i : incoming_next_) i = Instruction{.valid = false};
        tick_active_ = false;

        if (!spatial_hold_) step_orchestrators();
        step_pes();

        for (const auto& f : ports_next_)
            if (f.any()) tick_active_ = true;
        for (const RowState& r : rows_)
            if (!r.msg_pipe.empty()) tick_active_ = true;
        if (spatial_hold_) tick_active_ = true;
        if (tick_active_) {
            last_active_cycle_ = cycle_;
            idle_streak_ = 0;
        } else {
            idle_streak_++;
        }
        cycle_++;
    }

    bool quiescent() const { return idle_streak_ >= 4; }

    // --- spatial execution mode ----------------------------------------------

    // Preloads one instruction per PE through the instruction network.
    // Returns the configuration latency in cycles (3 x columns); afterwards
    // the PEs re-execute their held instruction each cycle until
    // spatial_release().
    long long spatial_configure(const std::vector<Instruction>& per_pe) {
        if (static_cast<int>(per_pe.size()) != cfg_.x_dim * cfg_.y_dim)
            throw SimError(Err::DegenerateShape, "need one instruction per PE");
        for (const Instruction& in : per_pe) {
            auto ok = validate_instruction(in);
            if (!ok) throw SimError(ok.error(), "spatial instruction rejected");
        }
        long long latency = 3LL * cfg_.x_dim;
        for (int c = 0; c < latency; ++c) {
            // one instruction every pipeline-depth cycles, east column first;
            // staged here so the next tick's swap presents it to PE 0
            for (int y = 0; y < cfg_.y_dim; ++y) {
                Instruction in = Instruction::nop();
                if (c % 3 == 0) in = per_pe[pe_index(cfg_.x_dim - 1 - c / 3, y)];
                incoming_next_[pe_index(0, y)] = in;
            }
            config_phase_ = true;
            fabric_tick();
            config_phase_ = false;
        }
        spatial_hold_ = true;
        for (PeState& p : pes_) p.relaxed_ports = true;
        return latency;
    }

    void spatial_release() {
        spatial_hold_ = false;
        for (PeState& p : pes_) p.relaxed_ports = false;
    }

    // End-of-run consistency: every injected psum packet was either absorbed
    // by a managed accumulate or collected at the bottom edge, and no column
    // is still waiting for a value.
    void finish_checks() const {
        if (packets_.injected != packets_.absorbed + packets_.collected)
            throw SimError(Err::RouterConflict,
                           "psum packet conservation broken: injected " +
                               std::to_string(packets_.injected) + " != absorbed " +
                               std::to_string(packets_.absorbed) + " + collected " +
                               std::to_string(packets_.collected),
                           cycle_);
        for (const auto& q : south_expect_)
            if (!q.empty())
                throw SimError(Err::RouterConflict, "south edge still expects values", cycle_);
    }

private:
    struct RowState {
        std::shared_ptr<const CompiledProgram> prog;
        std::vector<StreamToken> stream;
        size_t cursor = 0;
        long long start_cycle = 0;
        OrchRegisters regs;
        uint64_t transitions = 0;
        // messages from the northern row: (actionable_cycle, message)
        std::deque<std::pair<long long, OrchMessage>> msg_pipe;
    };

    int ring_size() const { return 3 * cfg_.x_dim + 8; }

    void log_event(const char* unit, int x, int y, const std::string& what) {
        if (!event_log_) return;
        (*event_log_) << cycle_ << "," << unit << "," << x << "," << y << "," << what << "\n";
    }

    void step_orchestrators() {
        for (int y = 0; y < cfg_.y_dim; ++y) {
            RowState& r = rows_[y];
            if (!r.prog) continue;
            const FsmProgram& p = r.prog->program;

            // message visibility (emitted north at t, actionable here at t+3)
            r.regs.msg = OrchMessage{};
            if (!r.msg_pipe.empty() && r.msg_pipe.front().first <= cycle_) {
                r.regs.msg = r.msg_pipe.front().second;
                r.msg_pipe.pop_front();
            }

            // head token
            if (cycle_ < r.start_cycle || r.stream.empty()) {
                r.regs.input = StreamToken{};  // tag 0: idle
            } else if (r.cursor >= r.stream.size()) {
                r.regs.input = StreamToken{};
                if (p.eos_tag >= 0) r.regs.input.tag = static_cast<uint8_t>(p.eos_tag);
            } else {
                r.regs.input = r.stream[r.cursor];
            }

            StepOut step = orchestrator_step(r.regs, *r.prog, cfg_.use_lut, cycle_, y);
            if (step.consume) {
                if (r.cursor >= r.stream.size())
                    throw SimError(Err::MalformedStream, "consume past stream end", cycle_, -1, y);
                r.cursor++;
            }
            if (step.transition) r.transitions++;
            if (step.inst.op != Opcode::NOP || step.inst.flags || step.consume ||
                step.south.id != kMsgNone || r.cursor < r.stream.size())
                tick_active_ = true;

            // psum packet accounting
            if (r.regs.msg.id == kMsgPSum && !step.south_is_relay) packets_.absorbed++;
            if (step.south.id != kMsgNone) {
                OrchMessage msg = step.south;
                if (!step.south_is_relay) {
                    msg.packet = ++next_packet_;
                    packets_.injected++;
                }
                if (y + 1 < cfg_.y_dim) {
                    rows_[y + 1].msg_pipe.emplace_back(cycle_ + 3, msg);
                } else {
                    packets_.collected++;
                    if (south_mode_ == SouthEdgeMode::PsumByRid)
                        for (int x = 0; x < cfg_.x_dim; ++x) south_expect_[x].push_back(msg.rid);
                }
                log_event("orch", 0, y, std::string("msg ") + std::to_string(msg.rid));
            }

            incoming_now_[pe_index(0, y)] = step.inst;
            if (event_log_ && cfg_.trace_verbosity > 1)
                log_event("orch", 0, y, "issue " + disassemble(step.inst));
        }
    }

    void step_pes() {
        for (int y = 0; y < cfg_.y_dim; ++y) {
            for (int x = 0; x < cfg_.x_dim; ++x) {
                int idx = pe_index(x, y);
                PeState& p = pes_[idx];
                Instruction in = incoming_now_[idx];
                if (spatial_hold_) in = p.hold_active ? p.held : Instruction{.valid = false};

                // staggered-issue law: PE x must execute what the row issued
                // 3x cycles earlier
                if (!spatial_hold_ && !config_phase_ && in.valid && x > 0) {
                    long long t0 = cycle_ - 3LL * x;
                    if (t0 >= 0) {
                        const PackedInstruction& expect = issue_ring_[y][t0 % ring_size()];
                        if (!(expect == pack_instruction(in))) staggered_violations_++;
                    }
                }
                if (!spatial_hold_ && x == 0 && in.valid)
                    issue_ring_[y][cycle_ % ring_size()] = pack_instruction(in);

                PortFrame frame = ports_now_[idx];
                supply_edges(p, in, frame);

                PeTickOut out = p.pe_tick(in, frame, cycle_, config_phase_);
                if (p.pipeline_working() || (in.valid && (in.op != Opcode::NOP || in.flags)))
                    tick_active_ = true;

                if (cfg_.record_traces && in.valid) traces_[idx].emplace_back(cycle_, in);

                route_outputs(x, y, out);

                if (out.forward && x + 1 < cfg_.x_dim && !spatial_hold_)
                    incoming_next_[pe_index(x + 1, y)] = *out.forward;
            }
        }
    }

    // Boundary semantics: ports facing off the grid read from the edge
    // feeders when data is queued and as zero otherwise; rendezvous checking
    // applies only to internal links.
    void supply_edges(PeState& p, const Instruction& in, PortFrame& frame) {
        if (!in.valid) return;
        auto reads_dir = [&](Dir d) {
            Region r1 = decode_address(in.op1);
            Region r2 = decode_address(in.op2);
            if (r1.kind == RegionKind::RouterPort && r1.offset == static_cast<uint16_t>(d)) return true;
            if (r2.kind == RegionKind::RouterPort && r2.offset == static_cast<uint16_t>(d)) return true;
            if (d == Dir::N && (in.flags & kFlagBypassNS)) return true;
            return false;
        };
        if (p.y == 0 && reads_dir(Dir::N) && !frame.at(Dir::N)) {
            if (!north_feed_[p.x].empty()) {
                frame.at(Dir::N) = north_feed_[p.x].front();
                north_feed_[p.x].pop_front();
            } else {
                frame.at(Dir::N) = VecWord::zero();
            }
        }
        if (p.x == 0 && reads_dir(Dir::W) && !frame.at(Dir::W)) {
            if (!west_feed_[p.y].empty()) {
                frame.at(Dir::W) = west_feed_[p.y].front();
                west_feed_[p.y].pop_front();
            } else {
                frame.at(Dir::W) = VecWord::zero();
            }
        }
        if (p.x == cfg_.x_dim - 1 && reads_dir(Dir::E) && !frame.at(Dir::E))
            frame.at(Dir::E) = VecWord::zero();
        if (p.y == cfg_.y_dim - 1 && reads_dir(Dir::S) && !frame.at(Dir::S))
            frame.at(Dir::S) = VecWord::zero();
    }

    void route_outputs(int x, int y, const PeTickOut& out) {
        for (int d = 0; d < 4; ++d) {
            const auto& v = out.out.val[d];
            if (!v) continue;
            metrics_.noc_transfers++;
            int nx = x, ny = y;
            Dir dir = static_cast<Dir>(d);
            switch (dir) {
                case Dir::N: ny--; break;
                case Dir::S: ny++; break;
                case Dir::E: nx++; break;
                case Dir::W: nx--; break;
            }
            if (nx >= 0 && nx < cfg_.x_dim && ny >= 0 && ny < cfg_.y_dim) {
                Dir opposite = dir == Dir::N ? Dir::S : dir == Dir::S ? Dir::N : dir == Dir::E ? Dir::W : Dir::E;
                auto& slot = ports_next_[pe_index(nx, ny)].at(opposite);
                if (slot)
                    throw SimError(Err::RouterConflict, "two values on one link", cycle_, nx, ny);
                slot = *v;
            } else if (dir == Dir::S && y == cfg_.y_dim - 1) {
                if (south_mode_ == SouthEdgeMode::PsumByRid) {
                    if (south_expect_[x].empty())
                        throw SimError(Err::RouterConflict, "south edge value without a pending row id",
                                       cycle_, x, y);
                    int64_t rid = south_expect_[x].front();
                    south_expect_[x].pop_front();
                    south_values_[x].emplace_back(rid, *v);
                }
                // Discard mode drops bottom-edge values (e.g. chunk forwards).
            } else if (dir == Dir::E && x == cfg_.x_dim - 1) {
                east_values_[y].push_back(*v);
            }
            // values driven off the north or west edge vanish
        }
    }

    FabricConfig cfg_;
    long long cycle_ = 0;
    std::vector<PeState> pes_;
    std::vector<RowState> rows_;
    std::vector<PortFrame> ports_now_, ports_next_;
    std::vector<Instruction> incoming_now_, incoming_next_;
    std::vector<std::deque<VecWord>> north_feed_, west_feed_;
    std::vector<std::vector<std::pair<int64_t, VecWord>>> south_values_;
    std::vector<std::deque<int64_t>> south_expect_;
    std::vector<std::vector<VecWord>> east_values_;
    std::vector<std::vector<PackedInstruction>> issue_ring_;
    std::vector<std::vector<std::pair<long long, Instruction>>> traces_;
    SouthEdgeMode south_mode_ = SouthEdgeMode::PsumByRid;
    PacketStats packets_;
    Metrics metrics_;
    uint64_t staggered_violations_ = 0;
    uint64_t next_packet_ = 0;
    bool spatial_hold_ = false;
    bool config_phase_ = false;
    bool tick_active_ = false;
    long long last_active_cycle_ = -1;
    long long idle_streak_ = 0;
    std::ostream* event_log_ = nullptr;
};

}  // namespace orchfab
