#include "templar/protocol.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "templar/atomic_file.hpp"
#include "templar/error.hpp"

namespace templar {

namespace {

constexpr std::array<std::string_view, 9> kColumns = {
    "template_id", "subject_id", "media_path", "lx0", "ly0", "lx1", "ly1", "lx2", "ly2"};

std::vector<std::pair<std::size_t, std::string_view>> csv_lines(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string_view>> lines;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.emplace_back(line_no, line);
    }
    return lines;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    raise(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

void expect_header(const std::vector<std::pair<std::size_t, std::string_view>>& lines,
                   std::span<const std::string_view> columns) {
    if (lines.empty()) raise(ErrorCode::ParseError, "line 1: missing header");
    const auto fields = split_csv_line(lines.front().second);
    if (fields.size() != columns.size() || !std::equal(fields.begin(), fields.end(), columns.begin())) {
        parse_fail(lines.front().first, "unexpected header '" + std::string(lines.front().second) + "'");
    }
}

}  // namespace

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<TemplateMedia> ProtocolTable::templates() const {
    std::map<std::string, TemplateMedia> by_id;
    for (const auto& row : rows) {
        auto& t = by_id[row.template_id];
        t.template_id = row.template_id;
        t.subject_id = row.subject_id;
        t.media.push_back(row.media_path);
    }
    std::vector<TemplateMedia> out;
    out.reserve(by_id.size());
    for (auto& [id, t] : by_id) out.push_back(std::move(t));
    return out;
}

ProtocolTable parse_protocol_text(std::string_view text, std::string split_id) {
    const auto lines = csv_lines(text);
    if (lines.empty()) raise(ErrorCode::ParseError, "line 1: missing header");
    const auto header = split_csv_line(lines.front().second);
    const bool with_landmarks = header.size() == kColumns.size();
    expect_header(lines, std::span(kColumns).first(with_landmarks ? 9 : 3));

    ProtocolTable table;
    table.split_id = std::move(split_id);
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, std::string> subject_of;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto [line_no, line] = lines[i];
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) {
            parse_fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(f.size()));
        }
        ProtocolRow row{std::string(f[0]), std::string(f[1]), std::string(f[2]), std::nullopt};
        if (row.template_id.empty() || row.subject_id.empty() || row.media_path.empty()) {
            parse_fail(line_no, "empty identifier field");
        }
        if (with_landmarks) {
            const bool all_empty = std::all_of(f.begin() + 3, f.end(), [](auto s) { return s.empty(); });
            if (!all_empty) {
                std::array<Point2, 3> pts{};
                for (int k = 0; k < 6; ++k) {
                    const auto v = parse_double(f[3 + k]);
                    if (!v) parse_fail(line_no, "bad landmark value '" + std::string(f[3 + k]) + "'");
                    (k % 2 == 0 ? pts[k / 2].x : pts[k / 2].y) = *v;
                }
                row.landmarks = pts;
            }
        }
        if (!seen.emplace(row.template_id, row.media_path).second) {
            parse_fail(line_no, "duplicate (template_id, media_path) = (" + row.template_id + ", " +
                                    row.media_path + ")");
        }
        auto [it, inserted] = subject_of.emplace(row.template_id, row.subject_id);
        if (!inserted && it->second != row.subject_id) {
            raise(ErrorCode::ConsistencyError, "template_id '" + row.template_id +
                                                   "' maps to subjects '" + it->second + "' and '" +
                                                   row.subject_id + "' (line " +
                                                   std::to_string(line_no) + ")");
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

ProtocolTable parse_protocol(const std::filesystem::path& path) {
    return parse_protocol_text(read_file_text(path), path.parent_path().filename().string());
}

std::string serialize_protocol(const ProtocolTable& table) {
    const bool with_landmarks =
        std::any_of(table.rows.begin(), table.rows.end(), [](const auto& r) { return r.landmarks.has_value(); });
    std::string out;
    const std::size_t ncols = with_landmarks ? 9 : 3;
    for (std::size_t i = 0; i < ncols; ++i) {
        if (i) out += ',';
        out += kColumns[i];
    }
    out += '\n';
    for (const auto& r : table.rows) {
        out += r.template_id + ',' + r.subject_id + ',' + r.media_path;
        if (with_landmarks) {
            for (int k = 0; k < 3; ++k) {
                out += ',';
                if (r.landmarks) out += format_double((*r.landmarks)[k].x);
                out += ',';
                if (r.landmarks) out += format_double((*r.landmarks)[k].y);
            }
        }
        out += '\n';
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_pairs_text(std::string_view text) {
    static constexpr std::array<std::string_view, 2> cols = {"template_a", "template_b"};
    const auto lines = csv_lines(text);
    expect_header(lines, cols);
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i].second);
        if (f.size() != 2 || f[0].empty() || f[1].empty()) parse_fail(lines[i].first, "expected 2 fields");
        out.emplace_back(std::string(f[0]), std::string(f[1]));
    }
    return out;
}

IdentificationLists parse_ident_text(std::string_view text) {
    static constexpr std::array<std::string_view, 2> cols = {"template_id", "role"};
    const auto lines = csv_lines(text);
    expect_header(lines, cols);
    IdentificationLists out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i].second);
        if (f.size() != 2 || f[0].empty()) parse_fail(lines[i].first, "expected 2 fields");
        if (f[1] == "probe") {
            out.probes.emplace_back(f[0]);
        } else if (f[1] == "gallery") {
            out.gallery.emplace_back(f[0]);
        } else {
            parse_fail(lines[i].first, "role must be probe or gallery, found '" + std::string(f[1]) + "'");
        }
    }
    return out;
}

}  // namespace templar
