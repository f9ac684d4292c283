#pragma once

// Model snapshot format (JSON, schema "mmlda.model", version 1): the graph
// spec, the training schedule and seed, and every node's unit state (config,
// per-document histograms, topic assignments, count tables, RNG state).
// Loading rebuilds the graph and checks the count tables against the assignments.

#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "mmlda/composition.hpp"
#include "mmlda/mlda.hpp"

namespace mmlda {

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const ModalityConfig& m);
ModalityConfig modality_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UnitConfig& c);
UnitConfig unit_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NodeSpec& n);
NodeSpec node_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GraphSpec& g);
GraphSpec graph_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainingSchedule& s);
TrainingSchedule schedule_from_json(const nlohmann::json& j);

nlohmann::json to_json(const UnitState& s);
UnitState unit_state_from_json(const nlohmann::json& j);

void write_model(std::ostream& out, const ComposedModel& model);
ComposedModel read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const ComposedModel& model);
ComposedModel load_model(const std::filesystem::path& path);

}  // namespace mmlda
