#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "moc/planner.hpp"
#include "moc/simulator.hpp"

namespace moc {

Strategy parse_strategy(const std::string& name);
SelectionKind parse_selection(const std::string& name);

/// Scenario from its JSON form. Unknown keys and wrong types raise
/// ValidationError naming the field; the result is validated.
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& scenario);

/// Reads and parses a scenario file (ValidationError on malformed JSON).
Scenario load_scenario(const std::filesystem::path& path);

nlohmann::json report_to_json(const SimReport& report);
std::string timeline_csv(const SimReport& report);

/// Per-phase assignments of the scenario's plan, for inspection.
nlohmann::json plan_to_json(const Scenario& scenario);

}  // namespace moc
