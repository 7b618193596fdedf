#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "templar/geom_align.hpp"

namespace templar {

struct ProtocolRow {
    std::string template_id;
    std::string subject_id;
    std::string media_path;
    std::optional<std::array<Point2, 3>> landmarks;

    bool operator==(const ProtocolRow&) const = default;
};

struct TemplateMedia {
    std::string template_id;
    std::string subject_id;
    std::vector<std::string> media;  // in file order
};

/// Validated template protocol: (template_id, media_path) unique and every
/// template_id bound to exactly one subject.
struct ProtocolTable {
    std::string split_id;
    std::vector<ProtocolRow> rows;

    /// Templates sorted by template_id.
    std::vector<TemplateMedia> templates() const;

    bool operator==(const ProtocolTable&) const = default;
};

/// CSV with header `template_id,subject_id,media_path[,lx0,ly0,lx1,ly1,lx2,ly2]`.
/// Rows may leave all six landmark fields empty. Throws ParseError (with the
/// 1-based line number) or ConsistencyError.
ProtocolTable parse_protocol_text(std::string_view text, std::string split_id = {});
ProtocolTable parse_protocol(const std::filesystem::path& path);

/// Emits the landmark columns only when at least one row carries landmarks.
std::string serialize_protocol(const ProtocolTable& table);

/// Verification pair list, header `template_a,template_b`.
std::vector<std::pair<std::string, std::string>> parse_pairs_text(std::string_view text);

struct IdentificationLists {
    std::vector<std::string> probes;
    std::vector<std::string> gallery;
};

/// Identification roles, header `template_id,role` with role probe|gallery.
IdentificationLists parse_ident_text(std::string_view text);

/// Splits one CSV line on commas (no quoting).
std::vector<std::string_view> split_csv_line(std::string_view line);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);

}  // namespace templar
