#pragma once

#include <cstdint>
#include <string>

namespace confab {

using Tick = std::int64_t;
using Currency = std::int64_t;

using DeviceId = std::string;
using ScenarioId = std::string;
using CommissionId = std::string;
using PackageId = std::string;
using SnapshotId = std::string;
using RolloutId = std::string;

} // namespace confab
