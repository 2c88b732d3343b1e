// common.hpp - shared error types, deterministic RNG helpers, small utilities.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace orchfab {

// Error categories surfaced by the library. Simulation-fatal conditions throw
// SimError carrying one of these; pure query APIs return Expected<T>.
enum class Err {
    MalformedInstruction,
    InvalidAddress,
    OperandShape,
    RendezvousViolation,
    RouterConflict,
    BufferFull,
    BufferEmpty,
    TooManyStates,
    TooManyTags,
    TooManyMsgIds,
    AmbiguousRules,
    IllegalTransition,
    MalformedStream,
    DegenerateShape,
    InfeasibleTiling,
    ShapeMismatch,
    ParseError,
    IoError,
    Timeout,
};

inline const char* err_name(Err e) {
    switch (e) {
        case Err::MalformedInstruction: return "MalformedInstruction";
        case Err::InvalidAddress: return "InvalidAddress";
        case Err::OperandShape: return "OperandShape";
        case Err::RendezvousViolation: return "RendezvousViolation";
        case Err::RouterConflict: return "RouterConflict";
        case Err::BufferFull: return "BufferFull";
        case Err::BufferEmpty: return "BufferEmpty";
        case Err::TooManyStates: return "TooManyStates";
        case Err::TooManyTags: return "TooManyTags";
        case Err::TooManyMsgIds: return "TooManyMsgIds";
        case Err::AmbiguousRules: return "AmbiguousRules";
        case Err::IllegalTransition: return "IllegalTransition";
        case Err::MalformedStream: return "MalformedStream";
        case Err::DegenerateShape: return "DegenerateShape";
        case Err::InfeasibleTiling: return "InfeasibleTiling";
        case Err::ShapeMismatch: return "ShapeMismatch";
        case Err::ParseError: return "ParseError";
        case Err::IoError: return "IoError";
        case Err::Timeout: return "Timeout";
    }
    return "Unknown";
}

// Fatal simulation error with location context (cycle and PE coordinates when
// known; -1 where not applicable).
class SimError : public std::runtime_error {
public:
    SimError(Err kind, const std::string& what, long long cycle = -1, int x = -1, int y = -1)
        : std::runtime_error(std::string(err_name(kind)) + ": " + what +
                             (cycle >= 0 ? " (cycle " + std::to_string(cycle) +
                                               (x >= 0 ? ", pe " + std::to_string(x) + "," + std::to_string(y) : "") + ")"
                                         : "")),
          kind_(kind), cycle_(cycle), x_(x), y_(y) {}

    Err kind() const { return kind_; }
    long long cycle() const { return cycle_; }
    int pe_x() const { return x_; }
    int pe_y() const { return y_; }

private:
    Err kind_;
    long long cycle_;
    int x_, y_;
};

// Minimal expected-or-error wrapper for total query APIs.
template <typename T>
class Expected {
public:
    Expected(T value) : ok_(true), value_(std::move(value)), err_(Err::ParseError) {}
    Expected(Err e) : ok_(false), value_(), err_(e) {}

    explicit operator bool() const { return ok_; }
    bool has_value() const { return ok_; }
    const T& value() const {
        if (!ok_) throw SimError(err_, "Expected::value on error");
        return value_;
    }
    T& value() {
        if (!ok_) throw SimError(err_, "Expected::value on error");
        return value_;
    }
    const T& operator*() const { return value(); }
    Err error() const { return err_; }

private:
    bool ok_;
    T value_;
    Err err_;
};

// Deterministic RNG. mt19937 output is pinned by the standard; the
// distributions are not, so bounded sampling is done by rejection here and
// shuffles are explicit Fisher-Yates. Identical seeds give identical streams
// on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

    // Uniform in [0, n). n must be > 0.
    uint32_t bounded(uint32_t n) {
        uint32_t limit = UINT32_MAX - UINT32_MAX % n;
        uint32_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    // Uniform in [lo, hi] inclusive.
    int32_t range(int32_t lo, int32_t hi) {
        return lo + static_cast<int32_t>(bounded(static_cast<uint32_t>(hi - lo + 1)));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = bounded(static_cast<uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    uint32_t raw() { return gen_(); }

private:
    std::mt19937 gen_;
};

inline int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace orchfab
