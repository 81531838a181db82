#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lcnn/pool.hpp"

namespace lcnn {

enum class FixtureKind : std::uint8_t { Conv, Pool, Classifier };

// One benchmark layer: CV1..CV12, PL1..PL10, CLASS1..CLASS5 drawn from the
// five study networks. `scale` divides the batch (and, past 1, caps the map
// extent at 64) so the whole sweep stays desk-sized; scale 1 is verbatim.
struct Fixture {
  std::string id;
  FixtureKind kind = FixtureKind::Conv;
  std::string network;

  std::uint32_t n = 1;  // batch
  std::uint32_t c = 1;  // input channels (classifier: categories)
  std::uint32_t h = 1, w = 1;

  // conv only
  std::uint32_t c_out = 0, f = 0, stride = 0, pad = 0;
  // pool only
  std::uint32_t win = 0, pool_stride = 0;
  PoolMode mode = PoolMode::Max;
};

const std::vector<Fixture>& fixture_table();
std::optional<Fixture> fixture_by_id(std::string_view id);
Fixture scale_fixture(const Fixture& fx, std::uint32_t scale);

// CSV listing of the table at the given scale, one row per fixture.
std::string fixture_list_csv(std::uint32_t scale);

}  // namespace lcnn
