#include "mpvesd/csv.hpp"

#include "mpvesd/errors.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace mpvesd {

void write_file_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    std::random_device rd;
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(rd());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os) {
            os.close();
            fs::remove(tmp);
            throw Error("write to " + tmp.string() + " failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot rename into " + path + ": " + ec.message());
    }
}

std::string format_double(double x)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string format_6g(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows)
{
    std::ostringstream os;
    auto line = [&os](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
}

std::string records_csv(const std::vector<ExperimentRecord>& records)
{
    std::ostringstream os;
    os << "family,N,trial,seed,statistic,value\n";
    for (const auto& r : records)
        os << r.family << ',' << r.N << ',' << r.trial << ',' << r.seed << ',' << r.statistic << ','
           << format_double(r.value) << '\n';
    return os.str();
}

std::string curve_csv(const Curve& curve)
{
    std::ostringstream os;
    os << "x,cumulative\n";
    for (const auto& [x, c] : curve.points) os << format_double(x) << ',' << format_double(c) << '\n';
    return os.str();
}

} // namespace mpvesd
