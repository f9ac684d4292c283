#include "mmlda/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "mmlda/atomic_file.hpp"
#include "mmlda/error.hpp"

namespace mmlda {

using nlohmann::json;

namespace {

void check_version(const json& j, std::string_view what) {
  if (!j.contains("schema_version")) throw FormatError(std::string(what) + ": missing schema_version");
  const int v = j.at("schema_version").get<int>();
  if (v != kDatasetSchemaVersion)
    throw FormatError(std::string(what) + ": schema_version " + std::to_string(v) + " is not supported (expected " +
                      std::to_string(kDatasetSchemaVersion) + ")");
}

}  // namespace

json to_json(const BlockDocument& doc) {
  json obs = json::object();
  for (const auto& [id, fv] : doc.observations) obs[id] = fv.counts;
  return json{{"schema_version", kDatasetSchemaVersion},
              {"kind", "block"},
              {"day", doc.day},
              {"block", doc.block},
              {"condition", std::string(to_string(doc.condition))},
              {"observations", std::move(obs)}};
}

BlockDocument block_from_json(const json& j) {
  check_version(j, "block record");
  BlockDocument doc;
  doc.day = j.at("day").get<int>();
  doc.block = j.at("block").get<int>();
  doc.condition = condition_from_string(j.at("condition").get<std::string>());
  for (const auto& [id, counts] : j.at("observations").items()) {
    FeatureVector fv{id, counts.get<std::vector<std::uint32_t>>()};
    if (fv.counts.size() != modality::vocab_size(id))
      throw FormatError("modality '" + id + "' has " + std::to_string(fv.counts.size()) + " entries, expected " +
                        std::to_string(modality::vocab_size(id)));
    doc.observations.emplace(id, std::move(fv));
  }
  return doc;
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  json header{{"schema", "mmlda.dataset"},      {"schema_version", kDatasetSchemaVersion},
              {"kind", "header"},               {"n_days", ds.days.size()},
              {"train_days", ds.train_days},    {"test_days", ds.test_days}};
  out << header.dump() << '\n';
  for (const Day& d : ds.days)
    for (const BlockDocument& b : d.blocks) out << to_json(b).dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset: empty input");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }
  check_version(header, "dataset header");
  if (header.value("schema", "") != "mmlda.dataset") throw FormatError("dataset header: wrong schema name");

  Dataset ds;
  ds.train_days = header.at("train_days").get<std::vector<int>>();
  ds.test_days = header.at("test_days").get<std::vector<int>>();
  const auto n_days = header.at("n_days").get<std::size_t>();
  ds.days.reserve(n_days);

  std::size_t line_no = 1, in_day = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    BlockDocument doc;
    try {
      doc = block_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (in_day == 0) {
      ds.days.emplace_back();
      ds.days.back().index = doc.day;
    } else if (doc.day != ds.days.back().index) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": day " + std::to_string(ds.days.back().index) +
                        " has fewer than six blocks");
    }
    ds.days.back().blocks[in_day] = std::move(doc);
    in_day = (in_day + 1) % kBlocksPerDay;
  }
  if (in_day != 0) throw FormatError("dataset: last day is incomplete");
  if (ds.days.size() != n_days)
    throw FormatError("dataset: header declares " + std::to_string(n_days) + " days, found " +
                      std::to_string(ds.days.size()));
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  write_file_atomically(path, [&](std::ostream& out) { write_dataset(out, ds); });
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

json to_json(const SimulatorParams& p) {
  return json{{"n_days", p.n_days},
              {"trials_per_block", p.trials_per_block},
              {"licking_mean_per_condition", p.licking_mean_per_condition},
              {"partner_licking_intercept", p.partner_licking_intercept},
              {"partner_licking_slope", p.partner_licking_slope},
              {"licking_noise_sd", p.licking_noise_sd},
              {"licking_day_sd", p.licking_day_sd},
              {"stimulus_base_histograms", p.stimulus_base_histograms},
              {"stimulus_noise_tokens", p.stimulus_noise_tokens},
              {"seed", p.seed}};
}

SimulatorParams params_from_json(const json& j) {
  SimulatorParams p;
  try {
    p.n_days = j.value("n_days", p.n_days);
    p.trials_per_block = j.value("trials_per_block", p.trials_per_block);
    p.licking_mean_per_condition = j.value("licking_mean_per_condition", p.licking_mean_per_condition);
    p.partner_licking_intercept = j.value("partner_licking_intercept", p.partner_licking_intercept);
    p.partner_licking_slope = j.value("partner_licking_slope", p.partner_licking_slope);
    p.licking_noise_sd = j.value("licking_noise_sd", p.licking_noise_sd);
    p.licking_day_sd = j.value("licking_day_sd", p.licking_day_sd);
    if (j.contains("stimulus_base_histograms")) {
      p.stimulus_base_histograms = j.at("stimulus_base_histograms").get<std::array<std::vector<std::uint32_t>, 6>>();
    } else if (j.contains("stimulus_template_support") || j.contains("stimulus_template_mass")) {
      p.stimulus_base_histograms = SimulatorParams::default_stimulus_templates(
          j.value("stimulus_template_support", std::size_t{8}), j.value("stimulus_template_mass", 40u));
    }
    p.stimulus_noise_tokens = j.value("stimulus_noise_tokens", p.stimulus_noise_tokens);
    p.seed = j.value("seed", p.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("simulator params: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace mmlda
