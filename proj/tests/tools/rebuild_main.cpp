// Rebuild harness for the build-determinism check: reads serialized factory
// inputs (NDJSON of {inputs, now, settings}) and writes one
// "<package_id> <checksum>" line per build.

#include <fstream>
#include <iostream>
#include <string>

#include "confab/canonical.hpp"
#include "confab/factory.hpp"

using namespace confab;

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: confab_rebuild <inputs.ndjson> <digests.out>\n";
    return 2;
  }
  std::ifstream in(argv[1]);
  if (!in) {
    std::cerr << "cannot open " << argv[1] << "\n";
    return 1;
  }
  std::ofstream out(argv[2], std::ios::binary | std::ios::trunc);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto doc = parse_document(line, "rebuild input");
    if (!doc.ok()) {
      std::cerr << "bad input line: " << doc.error().message << "\n";
      return 1;
    }
    auto inputs = FactoryInputs::from_json(doc.value().at("inputs"));
    if (!inputs.ok()) {
      std::cerr << "bad inputs: " << inputs.error().message << "\n";
      return 1;
    }
    auto settings = BuildSettings::from_json(doc.value().value("settings", Json::object()));
    if (!settings.ok()) {
      std::cerr << "bad settings: " << settings.error().message << "\n";
      return 1;
    }
    Tick now = doc.value().value("now", Tick{0});
    auto product = Factory::build(inputs.value(), now, settings.value());
    if (!product.ok()) {
      std::cerr << "build failed: " << product.error().message << "\n";
      return 1;
    }
    out << product.value().package.package_id << ' ' << product.value().package.checksum
        << '\n';
  }
  return 0;
}
