#pragma once

// Factories for the three social-comparison architectures:
//   IPM  infers the partner's subjective value (zRp present),
//   NCM  ignores the partner entirely,
//   ECM  attaches the partner's observed reward directly to the top node.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "mmlda/composition.hpp"

namespace mmlda {

enum class Architecture { IPM, NCM, ECM };

std::string_view to_string(Architecture a) noexcept;
Architecture architecture_from_string(std::string_view name);
/// Architecture named by a graph, if it is one of the three.
std::optional<Architecture> architecture_of(const GraphSpec& graph);

namespace node {
inline constexpr std::string_view kSelfAction = "zAs";
inline constexpr std::string_view kPartnerAction = "zAp";
inline constexpr std::string_view kSelfValue = "zRs";
inline constexpr std::string_view kPartnerValue = "zRp";
inline constexpr std::string_view kSituation = "zS";
}  // namespace node

/// Token mass per modality.
struct WeightConfig {
  std::uint32_t self_licking = 200;
  std::uint32_t partner_licking = 200;
  std::uint32_t self_reward = 200;
  std::uint32_t partner_reward = 200;
  std::uint32_t stimulus = 300;

  std::uint32_t for_modality(std::string_view id) const;
  void set(std::string_view id, std::uint32_t w);
  void validate() const;
  bool operator==(const WeightConfig&) const = default;
};

struct ModelDefaults {
  std::size_t n_topics = 6;
  double alpha = 1.0;
  double beta = 1.0;
  WeightConfig weights;
  std::uint32_t forward_weight = 200;
};

GraphSpec ipm_spec(const ModelDefaults& d = {});
GraphSpec ncm_spec(const ModelDefaults& d = {});
GraphSpec ecm_spec(const ModelDefaults& d = {});
GraphSpec architecture_spec(Architecture a, const ModelDefaults& d = {});

/// Number of free phi parameters: sum over nodes and modalities of K * (W - 1).
std::size_t free_parameter_count(const GraphSpec& graph);

}  // namespace mmlda
