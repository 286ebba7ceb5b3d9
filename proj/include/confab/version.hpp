#pragma once

#include <optional>
#include <string>
#include <vector>

#include "confab/result.hpp"

namespace confab {

// Dotted numeric version, e.g. "4.14.2". Non-numeric segments are rejected.
struct Version {
  std::vector<long> parts;

  static Result<Version> parse(const std::string& text);
  std::string to_string() const;

  // Segment-wise comparison; missing segments compare as 0.
  int compare(const Version& other) const;
  bool operator<(const Version& o) const { return compare(o) < 0; }
  bool operator<=(const Version& o) const { return compare(o) <= 0; }
  bool operator==(const Version& o) const { return compare(o) == 0; }
};

// Version match pattern for transformation-component keys. Accepted forms:
//   "*"           any version
//   "4.14"        exact
//   "4.x"         prefix (any 4.*)
//   "4.0..4.99"   closed range, inclusive
class VersionRange {
public:
  static Result<VersionRange> parse(const std::string& text);

  bool contains(const Version& v) const;
  bool overlaps(const VersionRange& other) const;
  const std::string& text() const { return text_; }

private:
  // Inclusive interval [lo, hi]; absent bound = unbounded on that side.
  std::optional<Version> lo_;
  std::optional<Version> hi_;
  std::string text_;
};

} // namespace confab
