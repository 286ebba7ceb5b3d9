#include "confab/events.hpp"

#include <fstream>

namespace confab {

std::string Event::to_line() const {
  Json j{{"tick", tick}, {"phase", phase}, {"kind", kind}, {"detail", detail}};
  return canonical_compact(j);
}

void EventLog::append(Tick tick, int phase, std::string kind, Json detail) {
  events_.push_back({tick, phase, std::move(kind), std::move(detail)});
}

std::string EventLog::serialize() const {
  std::string out;
  for (const auto& e : events_) {
    out += e.to_line();
    out += '\n';
  }
  return out;
}

Status EventLog::write_to(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return make_error("io", "cannot write " + path);
  out << serialize();
  return Status::ok_status();
}

std::vector<const Event*> EventLog::of_kind(const std::string& kind) const {
  std::vector<const Event*> out;
  for (const auto& e : events_) {
    if (e.kind == kind) out.push_back(&e);
  }
  return out;
}

} // namespace confab
