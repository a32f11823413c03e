#pragma once

#include <string>
#include <vector>

#include "fedup/experiment.hpp"

namespace fedup {

// CSV columns: run_id, seed, strategy, round, test_acc, malicious_acc,
// event, storage_bytes. Floats use shortest round-trip formatting, so
// re-emitting the same report is byte-identical and parsing recovers the
// exact values.
std::string report_to_csv(const MetricsReport& report);
void emit_csv(const MetricsReport& report, const std::string& path);

struct CsvRow {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string strategy;
    int round = 0;
    double test_acc = 0.0;
    double malicious_acc = 0.0;
    std::string event;
    std::uint64_t storage_bytes = 0;
};

std::vector<CsvRow> parse_csv(const std::string& text);
std::vector<CsvRow> load_csv(const std::string& path);

std::string summary_to_json_text(const MetricsReport& report);
void emit_summary_json(const MetricsReport& report, const std::string& path);

// Merges every *.csv under dir into one row list, ordered by file name.
std::vector<CsvRow> merge_report_dir(const std::string& dir);
std::string rows_to_csv(const std::vector<CsvRow>& rows);
std::string rows_to_json_text(const std::vector<CsvRow>& rows);

}  // namespace fedup
