#include "fedup/report.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedup/errors.hpp"

namespace fedup {

using nlohmann::json;

namespace {

constexpr const char* kHeader =
    "run_id,seed,strategy,round,test_acc,malicious_acc,event,storage_bytes";

std::string fmt_double(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IntegrityError("csv: double formatting failed");
    return std::string(buf, p);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw IntegrityError("csv: bad double field: " + s);
    return v;
}

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == ',' || c == '\n') c = ';';
    return out;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f << text;
    if (!f) throw IoError("write failed: " + path);
}

json row_to_json(const CsvRow& r) {
    return json{{"run_id", r.run_id},       {"seed", r.seed},
                {"strategy", r.strategy},   {"round", r.round},
                {"test_acc", r.test_acc},   {"malicious_acc", r.malicious_acc},
                {"event", r.event},         {"storage_bytes", r.storage_bytes}};
}

}  // namespace

std::string report_to_csv(const MetricsReport& report) {
    std::string out = kHeader;
    out += '\n';
    for (const auto& r : report.rounds) {
        out += sanitize(report.run_id);
        out += ',';
        out += std::to_string(report.seed);
        out += ',';
        out += sanitize(report.strategy);
        out += ',';
        out += std::to_string(r.round);
        out += ',';
        out += fmt_double(r.test_acc);
        out += ',';
        out += fmt_double(r.malicious_acc);
        out += ',';
        out += sanitize(r.event);
        out += ',';
        out += std::to_string(r.storage_bytes);
        out += '\n';
    }
    return out;
}

void emit_csv(const MetricsReport& report, const std::string& path) {
    write_file(path, report_to_csv(report));
}

std::vector<CsvRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IntegrityError("csv: empty input");
    if (line != kHeader) throw IntegrityError("csv: unexpected header: " + line);
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                f.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (f.size() != 8) throw IntegrityError("csv: bad field count in row: " + line);
        CsvRow r;
        r.run_id = f[0];
        r.seed = std::stoull(f[1]);
        r.strategy = f[2];
        r.round = std::stoi(f[3]);
        r.test_acc = parse_double(f[4]);
        r.malicious_acc = parse_double(f[5]);
        r.event = f[6];
        r.storage_bytes = std::stoull(f[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<CsvRow> load_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_csv(text);
}

std::string summary_to_json_text(const MetricsReport& report) {
    const RunSummary& s = report.summary;
    json j;
    j["run_id"] = report.run_id;
    j["seed"] = report.seed;
    j["strategy"] = report.strategy;
    j["rounds_executed"] = report.rounds.size();
    j["test_acc_before"] = s.test_acc_before;
    j["test_acc_after"] = s.test_acc_after;
    j["malicious_acc_before"] = s.malicious_acc_before;
    j["malicious_acc_after"] = s.malicious_acc_after;
    if (s.unlearning_performed) {
        json arr = json::array();
        for (const auto& u : s.unlearns) {
            arr.push_back({{"unlearn_round", u.unlearn_round},
                           {"clients", u.clients},
                           {"p_used", u.p_used},
                           {"similarity", u.similarity},
                           {"r_star", u.r_star},
                           {"r_star_converged", u.r_star_converged},
                           {"baseline_b", u.baseline_b},
                           {"r_rec", u.r_rec},
                           {"bound", u.bound},
                           {"pruned_indices", u.pruned_indices},
                           {"post_prune_test_acc", u.post_prune_test_acc},
                           {"post_prune_malicious_acc", u.post_prune_malicious_acc}});
        }
        j["unlearning"] = arr;
    } else {
        j["unlearning"] = nullptr;
    }
    j["storage"] = {{"model_bytes", s.storage.model_bytes},
                    {"fedup_bytes", s.storage.fedup_bytes},
                    {"historical_bytes", s.storage.historical_bytes}};
    return j.dump(2) + "\n";
}

void emit_summary_json(const MetricsReport& report, const std::string& path) {
    write_file(path, summary_to_json_text(report));
}

std::vector<CsvRow> merge_report_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("report: not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    std::vector<CsvRow> rows;
    for (const auto& f : files) {
        auto part = load_csv(f);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

std::string rows_to_csv(const std::vector<CsvRow>& rows) {
    std::string out = kHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += sanitize(r.run_id) + ',' + std::to_string(r.seed) + ',' + sanitize(r.strategy) +
               ',' + std::to_string(r.round) + ',' + fmt_double(r.test_acc) + ',' +
               fmt_double(r.malicious_acc) + ',' + sanitize(r.event) + ',' +
               std::to_string(r.storage_bytes) + '\n';
    }
    return out;
}

std::string rows_to_json_text(const std::vector<CsvRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(row_to_json(r));
    return arr.dump(2) + "\n";
}

}  // namespace fedup
