#include "confab/docio.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include "confab/canonical.hpp"

namespace confab {

namespace fs = std::filesystem;

Result<std::vector<TransformationComponent>> load_components_dir(const std::string& dir) {
  std::vector<TransformationComponent> out;
  if (!fs::is_directory(dir)) {
    return make_error("not-found", "components directory missing: " + dir);
  }
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  for (const auto& path : entries) {
    auto doc = load_document(path.string());
    if (!doc.ok()) return doc.error();
    auto component = TransformationComponent::from_json(doc.value());
    if (!component.ok()) {
      return make_error(component.error().category,
                        path.string() + ": " + component.error().message);
    }
    out.push_back(component.value());
  }
  return out;
}

std::string metrics_csv(const std::vector<TransferRecord>& transfers) {
  std::map<Tick, long> per_tick;
  std::map<std::string, size_t> per_node;
  for (const auto& t : transfers) {
    per_tick[t.tick] += 1;
    per_node[t.sender] += t.bytes;
  }
  std::ostringstream out;
  out << "kind,key,value\n";
  for (const auto& [tick, count] : per_tick) {
    out << "tick_transfers," << tick << ',' << count << '\n';
  }
  for (const auto& [node, bytes] : per_node) {
    out << "node_bytes_sent," << node << ',' << bytes << '\n';
  }
  return out.str();
}

} // namespace confab
