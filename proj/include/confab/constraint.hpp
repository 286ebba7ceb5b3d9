#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "confab/device_model.hpp"
#include "confab/result.hpp"

namespace confab {

// Boundary-constraint expressions over the member devices of a business
// scenario. Single-line infix grammar (see docs/constraint-grammar.ebnf):
//
//   count(service temp-sensing level >= 1) >= 1
//   NOT(capabilities/sensing/polling_rate > 100) AND online
//
// Field comparisons hold when EVERY member state satisfies them; service
// counts aggregate across members. Missing fields are an evaluation error,
// never false.

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

const char* compare_op_text(CompareOp op);

struct ConstraintNode;
using ConstraintPtr = std::shared_ptr<const ConstraintNode>;

struct ConstraintNode {
  enum class Kind { Compare, ServiceCount, BoolField, Not, And, Or };
  Kind kind;

  // Compare / BoolField
  std::string path;
  CompareOp op = CompareOp::Eq;
  Json literal;

  // ServiceCount: count of members providing `service` at level >= min_level,
  // compared against `threshold`.
  std::string service;
  int min_level = 1;
  long threshold = 0;

  std::vector<ConstraintPtr> children;
};

struct Constraint {
  ConstraintPtr root;
  std::string text; // source form, kept for display and serialization

  bool valid() const { return root != nullptr; }
};

Result<Constraint> parse_constraint(const std::string& text);

// Evaluates over the full member state map. Total: a referenced device
// missing from `states`, an unknown path, or a type mismatch yields an error
// rather than false.
Result<bool> evaluate_constraint(const Constraint& c,
                                 const std::map<DeviceId, DeviceState>& states);

// Looks a constraint path up in one device state: configurable values first,
// then the built-in live fields charge_pct and online.
const Json* state_field(const DeviceState& s, const std::string& path, Json& scratch);

// A device group protected by boundary constraints that must hold at all
// times.
struct BusinessScenario {
  ScenarioId scenario_id;
  std::set<DeviceId> member_devices;
  std::vector<Constraint> constraints;

  Json to_json() const;
  static Result<BusinessScenario> from_json(const Json& j);
};

} // namespace confab
