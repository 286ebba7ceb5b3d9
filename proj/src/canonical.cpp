#include "confab/canonical.hpp"

#include <fstream>
#include <sstream>

namespace confab {

std::string canonical_dump(const Json& j) {
  return j.dump(2) + "\n";
}

std::string canonical_compact(const Json& j) {
  return j.dump();
}

Result<Json> parse_document(const std::string& text, const std::string& what) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    return make_error("parse", "invalid document: " + what);
  }
  return j;
}

Result<Json> load_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return make_error("not-found", "cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_document(buf.str(), path);
}

Status write_document(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return make_error("io", "cannot write " + path);
  }
  out << canonical_dump(j);
  return Status::ok_status();
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

const Json* resolve_path(const Json& tree, std::string_view path) {
  const Json* node = &tree;
  for (const auto& part : split_path(path)) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

void set_path(Json& tree, std::string_view path, Json value) {
  Json* node = &tree;
  auto parts = split_path(path);
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
  }
  if (!parts.empty()) {
    (*node)[parts.back()] = std::move(value);
  }
}

} // namespace confab
