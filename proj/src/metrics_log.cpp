#include "maskd/metrics_log.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace maskd {
namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& msg) {
    throw std::runtime_error("read_metrics: " + path + ":" + std::to_string(line) + ": " + msg);
}

void check_monotone(const MetricsLog& log, const char* what) {
    for (std::size_t i = 1; i < log.rows.size(); ++i)
        if (log.rows[i].iteration < log.rows[i - 1].iteration)
            throw std::runtime_error(std::string(what) + ": iteration column is not monotone at row " +
                                     std::to_string(i));
}

}  // namespace

void write_metrics(const MetricsLog& log, const std::string& path) {
    check_monotone(log, "write_metrics");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_metrics: cannot open '" + path + "' for writing");
    f << kMetricsHeader << '\n';
    for (const auto& r : log.rows) {
        f << r.iteration << ',' << fmt17(r.task) << ',' << fmt17(r.div) << ',' << fmt17(r.distill)
          << ',' << fmt17(r.lr) << ',' << fmt17(r.accuracy) << ',' << fmt17(r.miou) << '\n';
    }
    if (!f) throw std::runtime_error("write_metrics: write failed for '" + path + "'");
}

MetricsLog read_metrics(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_metrics: cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(f, line)) parse_fail(path, 1, "missing header");
    ++lineno;
    if (line == std::string(kMetricsHeader) + "\r") line.pop_back();
    if (line != kMetricsHeader)
        parse_fail(path, lineno, "header mismatch, expected '" + std::string(kMetricsHeader) + "'");

    MetricsLog log;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (cols.size() != 7)
            parse_fail(path, lineno, "expected 7 columns, got " + std::to_string(cols.size()));
        MetricsRow r;
        char* end = nullptr;
        r.iteration = std::strtoll(cols[0].c_str(), &end, 10);
        if (end == cols[0].c_str() || *end != '\0')
            parse_fail(path, lineno, "bad iteration '" + cols[0] + "'");
        double* fields[6] = {&r.task, &r.div, &r.distill, &r.lr, &r.accuracy, &r.miou};
        for (int i = 0; i < 6; ++i) {
            const std::string& s = cols[static_cast<std::size_t>(i) + 1];
            *fields[i] = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0')
                parse_fail(path, lineno, "bad numeric value '" + s + "'");
        }
        log.rows.push_back(r);
    }
    check_monotone(log, "read_metrics");
    return log;
}

}  // namespace maskd
