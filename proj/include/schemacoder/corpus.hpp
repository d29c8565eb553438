#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace schemacoder {

using LineId = std::int64_t;

struct LogLine {
    LineId id = 0;  // 1-based
    std::string content;
};

struct LogFile {
    std::vector<LogLine> lines;
    std::string source_path;

    LineId total_lines() const { return static_cast<LineId>(lines.size()); }
    const std::string& content_of(LineId id) const { return lines[static_cast<std::size_t>(id - 1)].content; }
};

struct Chunk {
    int id = 0;  // 0-based
    LineId first_line = 0;
    LineId last_line = 0;  // inclusive
    std::string text;      // member lines joined with '\n'
    bool oversized = false;

    LineId line_count() const { return last_line - first_line + 1; }
};

// Per-line expected template, `<*>` marking variables.
struct GroundTruth {
    std::map<LineId, std::string> templates;

    std::size_t size() const { return templates.size(); }
};

struct SegmentConfig {
    std::size_t max_tokens = 2048;
    std::size_t max_lines = 50;
};

LogFile load_log(const std::string& path);
LogFile load_log_from_string(std::string_view text, std::string source_path = "<memory>");

GroundTruth load_ground_truth(const std::string& path);
GroundTruth load_ground_truth_from_string(std::string_view csv_text);

// Throws MismatchError when the ground truth does not cover exactly the
// log's line ids.
void bind_ground_truth(const GroundTruth& truth, const LogFile& log);

std::vector<Chunk> segment(const LogFile& log, const SegmentConfig& cfg);

// Builds the chunk for an arbitrary contiguous line span (used for residual
// chunks). Ids are assigned by the caller.
Chunk make_chunk(const LogFile& log, int id, LineId first, LineId last, std::size_t token_budget);

}  // namespace schemacoder
