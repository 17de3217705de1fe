#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "pcgs/core_model.hpp"

using namespace pcgs;

namespace {

bool
mentions(const std::vector<std::string>& msgs, const std::string& word)
{
  return std::any_of(msgs.begin(), msgs.end(),
                     [&](const std::string& m) { return m.find(word) != std::string::npos; });
}

}  // namespace

TEST_SUITE("core model") {

TEST_CASE("a generated scene is consistent") {
  SceneModel m = test::small_scene(60);
  CHECK(validate_scene(m).empty());
  CHECK(validate_scene(m) == validate_scene(m));
}

TEST_CASE("a missing location row is reported") {
  SceneModel m = test::small_scene(61);
  m.scene.num_anchors = 10;
  m.scene.locations.resize(9 * 3);
  auto msgs = validate_scene(m);
  CHECK(!msgs.empty());
  CHECK(mentions(msgs, "location"));
}

TEST_CASE("very negative scale outputs still give a clean report") {
  SceneModel m = test::small_scene(62);
  auto& last = m.net.rate_head.layers.back();
  for (int c = 0; c < last.out / 3; c++) {
    last.bias[3 * c + 2] = -1e6f;
    std::fill_n(&last.weight[size_t(3 * c + 2) * last.in], last.in, 0.f);
  }
  CHECK(validate_scene(m).empty());
}

TEST_CASE("inconsistent level sets are reported") {
  SceneModel m = test::small_scene(63);
  m.cfg.lambdas = {1e-4f, 2e-4f, 3e-5f};
  CHECK(!validate_scene(m).empty());
  m = test::small_scene(63);
  m.masks.level_feats.pop_back();
  CHECK(!validate_scene(m).empty());
  m = test::small_scene(63);
  m.net.grid.bits.pop_back();
  CHECK(!validate_scene(m).empty());
  m = test::small_scene(63);
  m.scene.anchor_feats[5] = NAN;
  CHECK(!validate_scene(m).empty());
}

TEST_CASE("binary grid entries dequantize to plus or minus one") {
  CHECK(HashGrid::dequantize(true) == 1.f);
  CHECK(HashGrid::dequantize(false) == -1.f);
  HashGrid g = HashGrid::make({0, 0, 0}, {1, 1, 1});
  CHECK(g.bits.size() * 64 >= g.num_entries());
  g.set_bit(12345, true);
  CHECK(g.bit(12345));
  g.set_bit(12345, false);
  CHECK(!g.bit(12345));
}

TEST_CASE("channel view follows the layout") {
  AnchorScene s = AnchorScene::zeros(2, 3, 4);
  ChannelLayout lay = s.layout();
  CHECK(lay.total() == 4 + 6 + 9);
  s.set_channel(1, 0, 1.5f);
  s.set_channel(1, 4, 2.5f);
  s.set_channel(1, lay.offset_channel(2, 1), 3.5f);
  CHECK(s.anchor_feats[4] == 1.5f);
  CHECK(s.scalings[6] == 2.5f);
  CHECK(s.offsets[9 + 7] == 3.5f);
}

}
