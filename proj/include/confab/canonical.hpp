#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "confab/result.hpp"

namespace confab {

using Json = nlohmann::json;

// Canonical document form: keys sorted lexicographically (nlohmann objects
// iterate in sorted key order), UTF-8, two-space indent, LF line endings,
// single trailing newline. Two semantically equal documents serialize to
// identical bytes.
std::string canonical_dump(const Json& j);

// Compact single-line canonical form, used inside event-log records and
// digest inputs.
std::string canonical_compact(const Json& j);

Result<Json> parse_document(const std::string& text, const std::string& what);
Result<Json> load_document(const std::string& path);
Status write_document(const std::string& path, const Json& j);

// Slash-separated field paths, e.g. "capabilities/computational/cores".
std::vector<std::string> split_path(std::string_view path);

// Resolves a path inside a JSON tree. Returns nullptr when any segment is
// missing or a non-object is traversed.
const Json* resolve_path(const Json& tree, std::string_view path);

// Inserts/overwrites the field at path, creating intermediate objects.
void set_path(Json& tree, std::string_view path, Json value);

} // namespace confab
