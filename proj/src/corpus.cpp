#include "schemacoder/corpus.hpp"

#include "schemacoder/csv.hpp"
#include "schemacoder/errors.hpp"
#include "schemacoder/util.hpp"

#include <fstream>
#include <sstream>

namespace schemacoder {

namespace {

// Replaces invalid UTF-8 byte sequences with U+FFFD so downstream string
// handling never trips on garbage bytes.
std::string sanitize_utf8(std::string_view in) {
    static const std::string replacement = "\xEF\xBF\xBD";
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        unsigned char c = static_cast<unsigned char>(in[i]);
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            ++i;
            continue;
        }
        std::size_t len = 0;
        if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            len = 4;
        }
        bool ok = len > 0 && i + len <= in.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            if ((static_cast<unsigned char>(in[i + k]) & 0xC0) != 0x80) ok = false;
        }
        if (ok) {
            out.append(in.substr(i, len));
            i += len;
        } else {
            out += replacement;
            ++i;
        }
    }
    return out;
}

}  // namespace

LogFile load_log_from_string(std::string_view text, std::string source_path) {
    LogFile log;
    log.source_path = std::move(source_path);
    std::vector<std::string> raw = split_lines(text);
    log.lines.reserve(raw.size());
    LineId id = 1;
    for (auto& line : raw) {
        log.lines.push_back(LogLine{id++, sanitize_utf8(line)});
    }
    return log;
}

LogFile load_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open log file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure on log file: " + path);
    return load_log_from_string(buf.str(), path);
}

GroundTruth load_ground_truth_from_string(std::string_view csv_text) {
    auto rows = parse_csv(csv_text);
    if (rows.empty()) throw FormatError("ground truth csv: missing header row");
    const auto& header = rows.front();
    std::size_t id_col = header.size();
    std::size_t template_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "LineId") id_col = i;
        if (header[i] == "EventTemplate") template_col = i;
    }
    if (id_col == header.size() || template_col == header.size()) {
        throw FormatError("ground truth csv: header must contain LineId and EventTemplate");
    }

    GroundTruth truth;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() <= std::max(id_col, template_col)) {
            throw FormatError("ground truth csv: row " + std::to_string(r + 1) + " has too few fields");
        }
        LineId id = 0;
        try {
            std::size_t pos = 0;
            id = std::stoll(row[id_col], &pos);
            if (pos != row[id_col].size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw FormatError("ground truth csv: bad LineId '" + row[id_col] + "'");
        }
        if (row[template_col].empty()) {
            throw FormatError("ground truth csv: empty EventTemplate for LineId " + std::to_string(id));
        }
        auto [it, inserted] = truth.templates.emplace(id, row[template_col]);
        (void)it;
        if (!inserted) {
            throw FormatError("ground truth csv: duplicate LineId " + std::to_string(id));
        }
    }
    return truth;
}

GroundTruth load_ground_truth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open ground truth csv: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure on ground truth csv: " + path);
    return load_ground_truth_from_string(buf.str());
}

void bind_ground_truth(const GroundTruth& truth, const LogFile& log) {
    if (static_cast<LineId>(truth.templates.size()) != log.total_lines()) {
        throw MismatchError("ground truth covers " + std::to_string(truth.templates.size()) +
                            " lines but log has " + std::to_string(log.total_lines()));
    }
    LineId expect = 1;
    for (const auto& [id, tmpl] : truth.templates) {
        (void)tmpl;
        if (id != expect) {
            throw MismatchError("ground truth line ids do not match log (expected " +
                                std::to_string(expect) + ", found " + std::to_string(id) + ")");
        }
        ++expect;
    }
}

Chunk make_chunk(const LogFile& log, int id, LineId first, LineId last, std::size_t token_budget) {
    Chunk chunk;
    chunk.id = id;
    chunk.first_line = first;
    chunk.last_line = last;
    std::string text;
    for (LineId i = first; i <= last; ++i) {
        if (i > first) text.push_back('\n');
        text += log.content_of(i);
    }
    chunk.text = std::move(text);
    chunk.oversized = estimate_tokens(chunk.text) > token_budget;
    return chunk;
}

std::vector<Chunk> segment(const LogFile& log, const SegmentConfig& cfg) {
    if (cfg.max_tokens < 64) throw std::invalid_argument("segment: max_tokens must be >= 64");
    if (cfg.max_lines < 1) throw std::invalid_argument("segment: max_lines must be >= 1");

    std::vector<Chunk> chunks;
    const LineId total = log.total_lines();
    LineId start = 1;
    int next_id = 0;

    auto close = [&](LineId first, LineId last) {
        chunks.push_back(make_chunk(log, next_id++, first, last, cfg.max_tokens));
    };

    std::size_t bytes = 0;   // bytes of the filling chunk's joined text
    LineId filled = 0;       // lines accumulated in the filling chunk
    LineId last_blank = 0;   // most recent blank line inside the filling chunk

    auto accumulate = [&](LineId from, LineId to) {
        bytes = 0;
        filled = 0;
        last_blank = 0;
        for (LineId i = from; i <= to; ++i) {
            const std::string& c = log.content_of(i);
            bytes += c.size() + (filled > 0 ? 1 : 0);
            ++filled;
            if (is_blank(c)) last_blank = i;
        }
    };

    LineId id = 1;
    while (id <= total) {
        const std::string& content = log.content_of(id);

        if (filled == 0 && (content.size() + 3) / 4 > cfg.max_tokens) {
            // A single line over budget becomes its own flagged chunk.
            close(id, id);
            start = id + 1;
            ++id;
            continue;
        }

        std::size_t line_bytes = content.size() + (filled > 0 ? 1 : 0);
        bool over_tokens = filled > 0 && (bytes + line_bytes + 3) / 4 > cfg.max_tokens;
        bool over_lines = filled >= static_cast<LineId>(cfg.max_lines);

        if (over_tokens || over_lines) {
            LineId end = id - 1;
            // Prefer a blank-line boundary when one sits in the last 20% of
            // the filling chunk.
            if (last_blank > 0 && last_blank < end) {
                LineId span = end - start + 1;
                LineId cutoff = start + (span * 4) / 5;
                if (last_blank >= cutoff) end = last_blank;
            }
            close(start, end);
            start = end + 1;
            // Lines past the blank boundary roll into the next chunk.
            accumulate(start, id - 1);
            continue;
        }

        bytes += line_bytes;
        ++filled;
        if (is_blank(content)) last_blank = id;
        ++id;
    }
    if (filled > 0) close(start, total);
    return chunks;
}

}  // namespace schemacoder
