#include "polarbench/matrix.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace polarbench {

std::string shape_string(Index rows, Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

namespace {

void append_number(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

}  // namespace

std::string to_csv(const DenseMatrix& m) {
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out.push_back(',');
            append_number(out, m(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const DenseMatrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << to_csv(m);
}

DenseMatrix parse_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t end = line.find(',', pos);
            if (end == std::string::npos) end = line.size();
            std::size_t b = pos;
            std::size_t e = end;
            while (b < e && line[b] == ' ') ++b;
            while (e > b && line[e - 1] == ' ') --e;
            double v = 0;
            auto res = std::from_chars(line.data() + b, line.data() + e, v);
            if (res.ec != std::errc() || res.ptr != line.data() + e || b == e) {
                throw Error("csv: bad number on line " + std::to_string(line_no));
            }
            if (!std::isfinite(v)) {
                throw NumericError("csv: non-finite value on line " + std::to_string(line_no));
            }
            row.push_back(v);
            pos = end + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DimensionError("csv: ragged row on line " + std::to_string(line_no));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error("csv: no data");
    DenseMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return m;
}

DenseMatrix read_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    return parse_csv(f);
}

}  // namespace polarbench
