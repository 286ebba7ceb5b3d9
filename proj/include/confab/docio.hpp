#pragma once

#include <string>
#include <vector>

#include "confab/package.hpp"
#include "confab/result.hpp"
#include "confab/shipping.hpp"

namespace confab {

// Loads every *.json component document from a directory, sorted by filename.
Result<std::vector<TransformationComponent>> load_components_dir(const std::string& dir);

// Metrics export: per-tick transfer counts and per-node bytes sent, as
// comma-separated rows `kind,key,value`.
std::string metrics_csv(const std::vector<TransferRecord>& transfers);

} // namespace confab
