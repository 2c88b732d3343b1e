// matrix.hpp - small integer matrix types and file I/O: Matrix Market
// coordinate format for sparse data, whitespace-delimited text for dense
// fixtures.
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "orchfab/common.hpp"

namespace orchfab {

struct Mat {
    int rows = 0, cols = 0;
    std::vector<int32_t> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0) {}

    int32_t& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    int32_t at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    bool operator==(const Mat&) const = default;

    int64_t nnz() const {
        int64_t n = 0;
        for (int32_t x : v) n += x != 0;
        return n;
    }
};

struct Coo {
    int64_t r, c;
    int32_t val;
};

struct SparseMat {
    int rows = 0, cols = 0;
    std::vector<Coo> entries;

    Mat dense() const {
        Mat m(rows, cols);
        for (const Coo& e : entries) m.at(static_cast<int>(e.r), static_cast<int>(e.c)) = e.val;
        return m;
    }

    static SparseMat from_dense(const Mat& m) {
        SparseMat s;
        s.rows = m.rows;
        s.cols = m.cols;
        for (int r = 0; r < m.rows; ++r)
            for (int c = 0; c < m.cols; ++c)
                if (m.at(r, c) != 0) s.entries.push_back({r, c, m.at(r, c)});
        return s;
    }
};

// --- Matrix Market coordinate format (integer general) ----------------------

inline void write_matrix_market(const SparseMat& s, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate integer general\n";
    out << s.rows << " " << s.cols << " " << s.entries.size() << "\n";
    for (const Coo& e : s.entries) out << e.r + 1 << " " << e.c + 1 << " " << e.val << "\n";
}

inline void write_matrix_market(const SparseMat& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw SimError(Err::IoError, "cannot write " + path);
    write_matrix_market(s, f);
}

inline Expected<SparseMat> read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) return Err::ParseError;
    if (line.rfind("%%MatrixMarket", 0) != 0) return Err::ParseError;
    if (line.find("coordinate") == std::string::npos) return Err::ParseError;
    bool pattern = line.find("pattern") != std::string::npos;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    std::istringstream hdr(line);
    SparseMat s;
    size_t n = 0;
    if (!(hdr >> s.rows >> s.cols >> n)) return Err::ParseError;
    s.entries.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) return Err::ParseError;
        std::istringstream ls(line);
        Coo e{0, 0, 1};
        if (pattern) {
            if (!(ls >> e.r >> e.c)) return Err::ParseError;
        } else {
            double val;
            if (!(ls >> e.r >> e.c >> val)) return Err::ParseError;
            e.val = static_cast<int32_t>(val);
        }
        e.r -= 1;
        e.c -= 1;
        if (e.r < 0 || e.r >= s.rows || e.c < 0 || e.c >= s.cols) return Err::ParseError;
        s.entries.push_back(e);
    }
    return s;
}

inline Expected<SparseMat> read_matrix_market_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) return Err::IoError;
    return read_matrix_market(f);
}

// --- dense text: "rows cols" header then row-major values -------------------

inline void write_dense_text(const Mat& m, std::ostream& out) {
    out << m.rows << " " << m.cols << "\n";
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) out << (c ? " " : "") << m.at(r, c);
        out << "\n";
    }
}

inline void write_dense_text(const Mat& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw SimError(Err::IoError, "cannot write " + path);
    write_dense_text(m, f);
}

inline Expected<Mat> read_dense_text(std::istream& in) {
    int rows, cols;
    if (!(in >> rows >> cols)) return Err::ParseError;
    if (rows <= 0 || cols <= 0) return Err::ParseError;
    Mat m(rows, cols);
    for (auto& x : m.v)
        if (!(in >> x)) return Err::ParseError;
    return m;
}

inline Expected<Mat> read_dense_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) return Err::IoError;
    return read_dense_text(f);
}

}  // namespace orchfab
