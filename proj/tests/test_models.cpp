#include <doctest.h>

#include <algorithm>

#include "mmlda/composition.hpp"
#include "mmlda/error.hpp"
#include "mmlda/models.hpp"

using namespace mmlda;

namespace {

const NodeSpec& find(const GraphSpec& g, std::string_view id) {
  auto it = std::find_if(g.nodes.begin(), g.nodes.end(), [&](const NodeSpec& n) { return n.id == id; });
  REQUIRE(it != g.nodes.end());
  return *it;
}

bool observes(const GraphSpec& g, std::string_view modality_id) {
  for (const NodeSpec& n : g.nodes)
    for (const ModalityConfig& m : n.observed)
      if (m.id == modality_id) return true;
  return false;
}

}  // namespace

TEST_CASE("IPM wiring") {
  const GraphSpec g = ipm_spec();
  CHECK(g.nodes.size() == 5);
  CHECK(find(g, node::kSituation).children == std::vector<std::string>{"zRs", "zRp"});
  CHECK(find(g, node::kSelfValue).children == std::vector<std::string>{"zAs"});
  CHECK(find(g, node::kPartnerValue).observed.front().id == "Rp");
  for (const NodeSpec& n : g.nodes) {
    CHECK(n.n_topics == 6);
    CHECK(n.alpha == 1.0);
    for (const ModalityConfig& m : n.observed) CHECK(m.beta == 1.0);
  }
  CHECK_NOTHROW(build(g));
}

TEST_CASE("NCM ignores the partner") {
  const GraphSpec g = ncm_spec();
  CHECK(g.nodes.size() == 3);
  CHECK_FALSE(observes(g, modality::kPartnerLicking));
  CHECK_FALSE(observes(g, modality::kPartnerReward));
  CHECK(find(g, node::kSituation).children == std::vector<std::string>{"zRs"});
  CHECK_NOTHROW(build(g));
}

TEST_CASE("ECM attaches the partner reward to the top node") {
  const GraphSpec g = ecm_spec();
  CHECK(g.nodes.size() == 4);
  const NodeSpec& top = find(g, node::kSituation);
  CHECK(std::any_of(top.observed.begin(), top.observed.end(), [](const auto& m) { return m.id == "Rp"; }));
  CHECK(std::none_of(g.nodes.begin(), g.nodes.end(), [](const auto& n) { return n.id == "zRp"; }));
  CHECK(top.children == std::vector<std::string>{"zRs", "zAp"});
  CHECK_NOTHROW(build(g));
}

TEST_CASE("baseline weights") {
  const GraphSpec g = ecm_spec();
  for (const NodeSpec& n : g.nodes)
    for (const ModalityConfig& m : n.observed) CHECK(m.weight == (m.id == "S" ? 300u : 200u));
  ModelDefaults d;
  d.weights.partner_reward = 77;
  CHECK(find(ecm_spec(d), node::kSituation).observed[1].weight == 77u);
  d.weights.stimulus = 0;
  CHECK_THROWS_AS(ecm_spec(d), ValidationError);
}

TEST_CASE("free parameter counts") {
  // K * (W - 1) summed over every observed and child pseudo-modality.
  const std::size_t ipm = 6 * 1 + 6 * 1 + (6 * 1 + 6 * 5) + (6 * 1 + 6 * 5) + (6 * 511 + 6 * 5 + 6 * 5);
  const std::size_t ecm = 6 * 1 + 6 * 1 + (6 * 1 + 6 * 5) + (6 * 511 + 6 * 1 + 6 * 5 + 6 * 5);
  CHECK(free_parameter_count(ipm_spec()) == ipm);
  CHECK(free_parameter_count(ecm_spec()) == ecm);
  CHECK(free_parameter_count(ecm_spec()) < free_parameter_count(ipm_spec()));
}

TEST_CASE("architecture names") {
  for (Architecture a : {Architecture::IPM, Architecture::NCM, Architecture::ECM}) {
    CHECK(architecture_from_string(to_string(a)) == a);
    CHECK(architecture_of(architecture_spec(a)) == a);
  }
  CHECK_THROWS_AS(architecture_from_string("XYZ"), ValidationError);
}
