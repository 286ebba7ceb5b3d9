#pragma once

#include <string>
#include <vector>

#include "confab/canonical.hpp"
#include "confab/types.hpp"

namespace confab {

// One structured simulation event. Serialized as newline-delimited compact
// JSON with lexicographically ordered keys, so logs from identical runs are
// byte-identical.
struct Event {
  Tick tick = 0;
  int phase = 0; // tick phase 1..8, 0 for run-level records
  std::string kind;
  Json detail = Json::object();

  std::string to_line() const;
};

class EventLog {
public:
  void append(Tick tick, int phase, std::string kind, Json detail = Json::object());

  const std::vector<Event>& events() const { return events_; }

  // Full log as NDJSON.
  std::string serialize() const;
  Status write_to(const std::string& path) const;

  // Events of one kind, in order.
  std::vector<const Event*> of_kind(const std::string& kind) const;

private:
  std::vector<Event> events_;
};

} // namespace confab
