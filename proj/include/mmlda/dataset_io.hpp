#pragma once

// Dataset file format (JSON Lines, schema "mmlda.dataset", version 1):
//
//   line 1   {"schema":"mmlda.dataset","schema_version":1,"kind":"header",
//             "n_days":N,"train_days":[...],"test_days":[...]}
//   line 2+  {"schema_version":1,"kind":"block","day":d,"block":b,
//             "condition":"Self75","observations":{"As":[..],"Ap":[..],...}}
//
// Blocks appear in day order, six per day. Observation arrays are dense counts.

#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "mmlda/corpus.hpp"

namespace mmlda {

inline constexpr int kDatasetSchemaVersion = 1;

void write_dataset(std::ostream& out, const Dataset& ds);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

nlohmann::json to_json(const BlockDocument& doc);
BlockDocument block_from_json(const nlohmann::json& j);

/// Simulator parameters as a JSON object; absent keys keep their defaults.
nlohmann::json to_json(const SimulatorParams& p);
SimulatorParams params_from_json(const nlohmann::json& j);

}  // namespace mmlda
