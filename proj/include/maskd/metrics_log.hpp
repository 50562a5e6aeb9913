#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maskd {

// Comma-separated training trace with a fixed column order. accuracy/miou
// hold the latest validation values, or -1 before the first evaluation.
struct MetricsRow {
    std::int64_t iteration = 0;
    double task = 0.0;
    double div = 0.0;
    double distill = 0.0;
    double lr = 0.0;
    double accuracy = -1.0;
    double miou = -1.0;
};

struct MetricsLog {
    std::vector<MetricsRow> rows;
};

inline constexpr const char* kMetricsHeader = "iteration,task,div,distill,lr,accuracy,miou";

// Values are written with 17 significant digits, so doubles survive the
// round-trip exactly. The iteration column must be non-decreasing.
void write_metrics(const MetricsLog& log, const std::string& path);
MetricsLog read_metrics(const std::string& path);

}  // namespace maskd
