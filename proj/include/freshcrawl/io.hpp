#pragma once

// CSV readers and writers for observation logs and crawl logs, plus atomic
// file output.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "freshcrawl/error.hpp"
#include "freshcrawl/estimation.hpp"
#include "freshcrawl/process_sim.hpp"

namespace freshcrawl {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

[[noreturn]] inline void parse_failure(std::size_t line, const std::string& what) {
    throw Error(ErrorKind::Data, "line " + std::to_string(line) + ": " + what);
}

inline double parse_double(std::string_view field, std::size_t line, const char* name) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value))
        parse_failure(line, std::string("cannot parse ") + name + " '" + std::string(field) + "'");
    return value;
}

inline std::uint64_t parse_count(std::string_view field, std::size_t line, const char* name) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size())
        parse_failure(line, std::string("cannot parse ") + name + " '" + std::string(field) + "'");
    return value;
}

inline std::uint8_t parse_bit(std::string_view field, std::size_t line, const char* name) {
    if (field == "0") return 0;
    if (field == "1") return 1;
    parse_failure(line, std::string(name) + " must be 0 or 1, got '" + std::string(field) + "'");
}

inline void expect_header(std::istream& in, const std::vector<std::string>& columns, std::size_t& line_no) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Data, "line 1: missing header row");
    ++line_no;
    const auto fields = split_csv(line);
    bool ok = fields.size() == columns.size();
    for (std::size_t k = 0; ok && k < columns.size(); ++k) ok = fields[k] == columns[k];
    if (!ok) {
        std::string expected;
        for (const auto& c : columns) expected += (expected.empty() ? "" : ",") + c;
        parse_failure(line_no, "expected header '" + expected + "'");
    }
}

}  // namespace detail

/// Observation logs keyed by page id, in order of first appearance.
struct PageLogs {
    std::vector<std::string> page_ids;
    std::vector<ObservationLog> logs;
};

/// Reads page_id,y_time,bit (partial) or page_id,y_time,count (full). The
/// first window of every page starts at time 0.
inline PageLogs read_observation_csv(std::istream& in, ObservationMode mode) {
    std::size_t line_no = 0;
    detail::expect_header(in, {"page_id", "y_time", mode == ObservationMode::Partial ? "bit" : "count"}, line_no);
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<double>> times;
    std::vector<std::vector<std::uint8_t>> bits;
    std::vector<std::vector<std::uint64_t>> counts;
    PageLogs out;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != 3) detail::parse_failure(line_no, "expected 3 columns");
        const std::string id(fields[0]);
        if (id.empty()) detail::parse_failure(line_no, "empty page_id");
        const double y = detail::parse_double(fields[1], line_no, "y_time");
        auto [it, inserted] = index.emplace(id, out.page_ids.size());
        if (inserted) {
            out.page_ids.push_back(id);
            times.emplace_back();
            bits.emplace_back();
            counts.emplace_back();
        }
        const std::size_t p = it->second;
        const double previous = times[p].empty() ? 0.0 : times[p].back();
        if (!(y > previous)) detail::parse_failure(line_no, "y_time must increase per page and start after 0");
        times[p].push_back(y);
        if (mode == ObservationMode::Partial)
            bits[p].push_back(detail::parse_bit(fields[2], line_no, "bit"));
        else
            counts[p].push_back(detail::parse_count(fields[2], line_no, "count"));
    }
    if (out.page_ids.empty()) throw Error(ErrorKind::Data, "observation file has no rows");
    for (std::size_t p = 0; p < out.page_ids.size(); ++p) {
        auto windows = ObservationLog::windows_from_times(times[p]);
        out.logs.push_back(mode == ObservationMode::Partial ? ObservationLog::partial(std::move(windows), bits[p])
                                                            : ObservationLog::full(std::move(windows), counts[p]));
    }
    return out;
}

inline void write_observation_csv(std::ostream& out, const PageLogs& logs) {
    detail::require(!logs.logs.empty(), "nothing to write");
    const bool partial = logs.logs.front().mode() == ObservationMode::Partial;
    out << "page_id,y_time," << (partial ? "bit" : "count") << '\n';
    out.precision(17);
    for (std::size_t p = 0; p < logs.logs.size(); ++p) {
        const auto& log = logs.logs[p];
        double y = 0.0;
        for (std::size_t n = 0; n < log.size(); ++n) {
            y += log.windows()[n];
            out << logs.page_ids[p] << ',' << y << ',';
            if (partial)
                out << static_cast<int>(log.bits()[n]) << '\n';
            else
                out << log.counts()[n] << '\n';
        }
    }
}

struct IngestResult {
    PageEnsemble ensemble;
    std::vector<std::string> page_ids;
    std::vector<ObservationLog> logs;
    std::vector<RateEstimate> estimates;
    std::size_t excluded_never_changed = 0;
    std::size_t excluded_always_changed = 0;
    std::vector<std::string> warnings;
};

/// Dataset presets for ingested crawl logs (rates per day).
inline constexpr RateBounds kDatasetBounds{1e-9, 25.0};

/// Reads page_id,crawl_time,changed,importance. Crawl times are measured from
/// the start of the log (time 0) and must increase per page. Pages that never
/// changed or changed on every crawl are dropped; the rest get a maximum
/// likelihood change rate and their importance as request rate.
inline IngestResult ingest_crawl_log(std::istream& in, RateBounds bounds = kDatasetBounds) {
    std::size_t line_no = 0;
    detail::expect_header(in, {"page_id", "crawl_time", "changed", "importance"}, line_no);
    struct Page {
        std::string id;
        std::vector<double> times;
        std::vector<std::uint8_t> bits;
        double importance = 0.0;
    };
    std::vector<Page> pages;
    std::map<std::string, std::size_t> index;
    std::vector<std::string> warnings;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != 4) detail::parse_failure(line_no, "expected 4 columns");
        const std::string id(fields[0]);
        if (id.empty()) detail::parse_failure(line_no, "empty page_id");
        const double t = detail::parse_double(fields[1], line_no, "crawl_time");
        const auto bit = detail::parse_bit(fields[2], line_no, "changed");
        const double importance = detail::parse_double(fields[3], line_no, "importance");
        if (importance < 0.0) detail::parse_failure(line_no, "importance must be nonnegative");
        auto [it, inserted] = index.emplace(id, pages.size());
        if (inserted) pages.push_back(Page{id, {}, {}, importance});
        Page& page = pages[it->second];
        const double previous = page.times.empty() ? 0.0 : page.times.back();
        if (!(t > previous)) detail::parse_failure(line_no, "crawl_time must increase per page and start after 0");
        if (!inserted && importance != page.importance) {
            warnings.push_back("line " + std::to_string(line_no) + ": importance of page '" + id +
                               "' changed; using the last value");
            page.importance = importance;
        }
        page.times.push_back(t);
        page.bits.push_back(bit);
    }

    std::vector<std::string> ids;
    std::vector<ObservationLog> logs;
    std::vector<RateEstimate> estimates;
    std::vector<double> xi, zeta;
    std::size_t never = 0, always = 0;
    EstimateOptions options;
    options.bounds = bounds;
    for (auto& page : pages) {
        std::size_t changed = 0;
        for (auto b : page.bits) changed += b;
        if (changed == 0) {
            ++never;
            continue;
        }
        if (changed == page.bits.size()) {
            ++always;
            continue;
        }
        if (page.importance <= 0.0) {
            warnings.push_back("page '" + page.id + "' has zero importance; excluded");
            continue;
        }
        auto log = ObservationLog::partial_from_times(page.times, page.bits);
        auto est = mle_estimate(log, options);
        ids.push_back(page.id);
        xi.push_back(est.xi_hat);
        zeta.push_back(page.importance);
        logs.push_back(std::move(log));
        estimates.push_back(est);
    }
    if (ids.empty())
        throw Error(ErrorKind::Data, "empty ensemble: no page survived the exclusion rule (" + std::to_string(never) +
                                         " never changed, " + std::to_string(always) + " always changed)");
    IngestResult out{PageEnsemble(std::move(xi), std::move(zeta), bounds), std::move(ids), std::move(logs),
                     std::move(estimates), never, always, std::move(warnings)};
    return out;
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so a failure never leaves a partial file behind.
inline void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorKind::Data, "cannot open " + tmp.string() + " for writing");
            writer(out);
            out.flush();
            if (!out) throw Error(ErrorKind::Data, "failed writing " + tmp.string());
        }
        fs::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    write_file_atomic(path, [&](std::ostream& out) { out << content; });
}

}  // namespace freshcrawl
