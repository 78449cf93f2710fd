#pragma once

// Check records and their JSON / plain-text rendering. Wall-clock data
// (timestamp, per-check runtimes) lives in a separate "timing" object so the
// rest of a report is byte-identical across runs of the same scenario.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "finrank/measure.hpp"

namespace finrank {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct CheckRecord {
    std::string name;      // suite.check
    std::string anchor;    // the result being checked
    CheckStatus status = CheckStatus::Skip;
    double value = 0.0;    // measured quantity
    double tolerance = 0.0;
    std::string detail;
    nlohmann::json repro = nlohmann::json::object();  // z, t, eps, atom... for failures
    double runtime_seconds = 0.0;
};

struct Report {
    std::vector<CheckRecord> records;
    std::string scenario_digest;
    std::string timestamp;

    std::size_t count(CheckStatus s) const {
        std::size_t n = 0;
        for (const CheckRecord& r : records) n += r.status == s ? 1 : 0;
        return n;
    }
    bool passed() const { return count(CheckStatus::Fail) == 0; }
};

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Runs `body`, which fills a record, and stores its wall time.
template <class Body>
CheckRecord timed_check(std::string name, std::string anchor, Body&& body) {
    CheckRecord r;
    r.name = std::move(name);
    r.anchor = std::move(anchor);
    const auto start = std::chrono::steady_clock::now();
    body(r);
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Pass when value <= tolerance (NaN fails).
inline void judge_at_most(CheckRecord& r, double value, double tolerance) {
    r.value = value;
    r.tolerance = tolerance;
    r.status = value <= tolerance ? CheckStatus::Pass : CheckStatus::Fail;
}

inline nlohmann::json report_to_json(const Report& report, bool include_timing = true) {
    nlohmann::json records = nlohmann::json::array();
    for (const CheckRecord& r : report.records) {
        nlohmann::json j{{"name", r.name},       {"anchor", r.anchor},       {"status", to_string(r.status)},
                         {"value", r.value},     {"tolerance", r.tolerance}, {"detail", r.detail}};
        if (!r.repro.empty()) j["repro"] = r.repro;
        records.push_back(std::move(j));
    }
    nlohmann::json out{{"toolkit_version", kToolkitVersion},
                       {"scenario_digest", report.scenario_digest},
                       {"summary",
                        {{"pass", report.count(CheckStatus::Pass)},
                         {"fail", report.count(CheckStatus::Fail)},
                         {"skip", report.count(CheckStatus::Skip)}}},
                       {"records", records}};
    if (include_timing) {
        nlohmann::json runtimes = nlohmann::json::object();
        for (const CheckRecord& r : report.records) runtimes[r.name] = r.runtime_seconds;
        out["timing"] = {{"timestamp", report.timestamp}, {"runtime_seconds", runtimes}};
    }
    return out;
}

inline std::string report_to_text(const Report& report) {
    std::size_t width = 5;
    for (const CheckRecord& r : report.records) width = std::max(width, r.name.size());
    std::ostringstream os;
    os << "finrank " << kToolkitVersion << "  scenario " << report.scenario_digest << "\n";
    os << std::left << std::setw(static_cast<int>(width) + 2) << "check" << std::setw(6) << "status" << std::right
       << std::setw(14) << "value" << std::setw(14) << "tolerance" << "  detail\n";
    for (const CheckRecord& r : report.records) {
        os << std::left << std::setw(static_cast<int>(width) + 2) << r.name << std::setw(6) << to_string(r.status)
           << std::right << std::setw(14) << std::setprecision(4) << std::scientific << r.value << std::setw(14)
           << r.tolerance << "  " << r.detail;
        if (r.status == CheckStatus::Fail && !r.repro.empty()) os << "  repro " << r.repro.dump();
        os << "\n";
    }
    os << report.count(CheckStatus::Pass) << " passed, " << report.count(CheckStatus::Fail) << " failed, "
       << report.count(CheckStatus::Skip) << " skipped\n";
    return os.str();
}

}  // namespace finrank
