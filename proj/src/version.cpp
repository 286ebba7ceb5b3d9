#include "confab/version.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace confab {

Result<Version> Version::parse(const std::string& text) {
  Version v;
  std::string cur;
  auto flush = [&]() -> bool {
    if (cur.empty()) return false;
    for (char c : cur) {
      if (c < '0' || c > '9') return false;
    }
    v.parts.push_back(std::strtol(cur.c_str(), nullptr, 10));
    cur.clear();
    return true;
  };
  for (char c : text) {
    if (c == '.') {
      if (!flush()) return make_error("parse", "bad version: " + text);
    } else {
      cur.push_back(c);
    }
  }
  if (!flush() || v.parts.empty()) {
    return make_error("parse", "bad version: " + text);
  }
  return v;
}

std::string Version::to_string() const {
  std::ostringstream out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out << '.';
    out << parts[i];
  }
  return out.str();
}

int Version::compare(const Version& other) const {
  size_t n = std::max(parts.size(), other.parts.size());
  for (size_t i = 0; i < n; ++i) {
    long a = i < parts.size() ? parts[i] : 0;
    long b = i < other.parts.size() ? other.parts[i] : 0;
    if (a != b) return a < b ? -1 : 1;
  }
  return 0;
}

Result<VersionRange> VersionRange::parse(const std::string& text) {
  VersionRange r;
  r.text_ = text;
  if (text == "*") {
    return r;
  }
  auto dots = text.find("..");
  if (dots != std::string::npos) {
    auto lo = Version::parse(text.substr(0, dots));
    auto hi = Version::parse(text.substr(dots + 2));
    if (!lo.ok() || !hi.ok()) return make_error("parse", "bad version range: " + text);
    if (hi.value() < lo.value()) return make_error("parse", "inverted version range: " + text);
    r.lo_ = lo.value();
    r.hi_ = hi.value();
    return r;
  }
  // Prefix form: trailing ".x" or ".*".
  if (text.size() > 2 &&
      (text.compare(text.size() - 2, 2, ".x") == 0 ||
       text.compare(text.size() - 2, 2, ".*") == 0)) {
    auto base = Version::parse(text.substr(0, text.size() - 2));
    if (!base.ok()) return make_error("parse", "bad version range: " + text);
    Version lo = base.value();
    Version hi = base.value();
    // "4.x" spans [4, 4.<max>...]: bump the last given segment for the open
    // end and subtract nothing; represent hi as lo with a huge next segment.
    hi.parts.push_back(std::numeric_limits<long>::max());
    r.lo_ = std::move(lo);
    r.hi_ = std::move(hi);
    return r;
  }
  auto exact = Version::parse(text);
  if (!exact.ok()) return make_error("parse", "bad version range: " + text);
  r.lo_ = exact.value();
  r.hi_ = exact.value();
  return r;
}

bool VersionRange::contains(const Version& v) const {
  if (lo_ && v < *lo_) return false;
  if (hi_ && *hi_ < v) return false;
  return true;
}

bool VersionRange::overlaps(const VersionRange& other) const {
  // Intervals [a,b] and [c,d] overlap iff a <= d and c <= b.
  auto le = [](const std::optional<Version>& a, const std::optional<Version>& b) {
    if (!a || !b) return true; // unbounded side always reaches
    return *a <= *b;
  };
  return le(lo_, other.hi_) && le(other.lo_, hi_);
}

} // namespace confab
