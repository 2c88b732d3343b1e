// workloads.hpp - sparse workload generation and brute-force reference
// products.
#pragma once

#include "orchfab/matrix.hpp"

namespace orchfab {

struct SparsitySpec {
    enum class Kind { UniformRandom, NM, Window } kind = Kind::UniformRandom;
    double rate = 0.0;  // fraction of zeros, 0..0.95 evaluated range
    int n = 1, m = 1;   // NM pattern
    int width = 1, seq = 1;  // Window pattern
    uint64_t seed = 1;

    static SparsitySpec uniform(double rate, uint64_t seed) {
        SparsitySpec s;
        s.kind = Kind::UniformRandom;
        s.rate = rate;
        s.seed = seed;
        return s;
    }
    static SparsitySpec nm(int n, int m, uint64_t seed) {
        SparsitySpec s;
        s.kind = Kind::NM;
        s.n = n;
        s.m = m;
        s.seed = seed;
        return s;
    }
    static SparsitySpec window(int width, int seq) {
        SparsitySpec s;
        s.kind = Kind::Window;
        s.width = width;
        s.seq = seq;
        return s;
    }
};

inline int32_t nonzero_int8(Rng& rng) {
    int32_t v = rng.range(-128, 126);
    if (v >= 0) v += 1;  // skip zero, keep int8 range
    return v;
}

// Deterministic matrix generation. UniformRandom places an exact count of
// nonzeros, round((1-rate)*size), so sparsity buckets stay crisp at small
// sizes. rate > 0.95 is outside the evaluated range and only warns.
inline Mat gen_matrix(int rows, int cols, const SparsitySpec& spec, std::string* warning = nullptr) {
    if (rows <= 0 || cols <= 0) throw SimError(Err::DegenerateShape, "matrix dims must be positive");
    Mat m(rows, cols);
    Rng rng(spec.seed);
    switch (spec.kind) {
        case SparsitySpec::Kind::UniformRandom: {
            if (spec.rate > 0.95 && warning)
                *warning = "sparsity above the evaluated 0.95 ceiling";
            int64_t size = static_cast<int64_t>(rows) * cols;
            int64_t nnz = static_cast<int64_t>((1.0 - spec.rate) * static_cast<double>(size) + 0.5);
            if (nnz > size) nnz = size;
            std::vector<int64_t> idx(size);
            for (int64_t i = 0; i < size; ++i) idx[i] = i;
            // partial Fisher-Yates: the first nnz slots become the support
            for (int64_t i = 0; i < nnz; ++i) {
                int64_t j = i + rng.bounded(static_cast<uint32_t>(size - i));
                std::swap(idx[i], idx[j]);
            }
            for (int64_t i = 0; i < nnz; ++i) m.v[idx[i]] = nonzero_int8(rng);
            break;
        }
        case SparsitySpec::Kind::NM: {
            if (spec.n < 1 || spec.m < spec.n) throw SimError(Err::DegenerateShape, "need 1 <= n <= m");
            for (int r = 0; r < rows; ++r) {
                for (int b = 0; b < cols; b += spec.m) {
                    int blk = std::min(spec.m, cols - b);
                    int take = std::min(spec.n, blk);
                    std::vector<int> pos(blk);
                    for (int i = 0; i < blk; ++i) pos[i] = i;
                    for (int i = 0; i < take; ++i) {
                        int j = i + static_cast<int>(rng.bounded(static_cast<uint32_t>(blk - i)));
                        std::swap(pos[i], pos[j]);
                    }
                    for (int i = 0; i < take; ++i) m.at(r, b + pos[i]) = nonzero_int8(rng);
                }
            }
            break;
        }
        case SparsitySpec::Kind::Window: {
            if (spec.width < 1 || spec.width > spec.seq)
                throw SimError(Err::DegenerateShape, "window width must be in 1..seq");
            // look-back band: position (r,c) active iff 0 <= r-c < width
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    if (r - c >= 0 && r - c < spec.width) m.at(r, c) = 1;
            break;
        }
    }
    return m;
}

// Brute-force reference product, the plain triple loop.
inline Mat oracle_matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw SimError(Err::ShapeMismatch, "inner dims differ");
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            int32_t acc = 0;
            for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
            c.at(i, j) = acc;
        }
    return c;
}

inline Mat oracle_spmm(const Mat& a, const Mat& b) { return oracle_matmul(a, b); }

inline Mat oracle_sddmm(const Mat& a, const Mat& b, const Mat& mask) {
    if (mask.rows != a.rows || mask.cols != b.cols)
        throw SimError(Err::ShapeMismatch, "mask shape must match the product");
    Mat c = oracle_matmul(a, b);
    for (int i = 0; i < c.rows; ++i)
        for (int j = 0; j < c.cols; ++j)
            if (mask.at(i, j) == 0) c.at(i, j) = 0;
    return c;
}

// Independently ordered accumulation (k-outer), used to cross-check the
// primary oracle.
inline Mat oracle_matmul_kouter(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw SimError(Err::ShapeMismatch, "inner dims differ");
    Mat c(a.rows, b.cols);
    for (int k = 0; k < a.cols; ++k)
        for (int i = 0; i < a.rows; ++i) {
            int32_t av = a.at(i, k);
            if (av == 0) continue;
            for (int j = 0; j < b.cols; ++j) c.at(i, j) += av * b.at(k, j);
        }
    return c;
}

}  // namespace orchfab
