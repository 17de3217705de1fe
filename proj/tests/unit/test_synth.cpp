#include "doctest.h"
#include "helpers.hpp"
#include "pcgs/error.hpp"
#include "pcgs/masking.hpp"
#include "pcgs/model_io.hpp"
#include "pcgs/synth.hpp"

using namespace pcgs;

TEST_SUITE("synth") {

TEST_CASE("ratio targets are met") {
  SynthSpec sp;
  sp.num_anchors = 10000;
  sp.offsets_per_anchor = 10;
  sp.feat_dim = 4;
  sp.anchor_ratio = {0.5, 0.8, 1.0};
  sp.gauss_ratio = {0.3, 0.6, 0.9};
  SceneModel m = generate(sp);
  CHECK(validate_scene(m).empty());
  MaskState st = build_mask_state(m.masks);
  for (int s = 1; s <= 3; s++) {
    CHECK(st.anchor_ratio(s) == doctest::Approx(sp.anchor_ratio[s - 1]).epsilon(0.02));
    CHECK(st.gauss_ratio(s) == doctest::Approx(sp.gauss_ratio[s - 1]).epsilon(0.02));
  }
}

TEST_CASE("generation is deterministic in the seed") {
  auto a = write_scene_model(test::small_scene(5));
  auto b = write_scene_model(test::small_scene(5));
  auto c = write_scene_model(test::small_scene(6));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("adversarial mode shares everything but the attribute pairing") {
  SynthSpec sp = test::small_spec(9);
  SceneModel cal = generate(sp);
  sp.mode = SynthMode::adversarial;
  SceneModel adv = generate(sp);
  CHECK(adv.net == cal.net);
  CHECK(adv.masks == cal.masks);
  CHECK(adv.scene.locations == cal.scene.locations);
  CHECK(adv.scene.anchor_feats != cal.scene.anchor_feats);
}

TEST_CASE("unreachable targets are rejected") {
  SynthSpec sp = test::small_spec();
  sp.anchor_ratio = {0.8, 0.5, 1.0};
  CHECK_THROWS_AS(check_synth_spec(sp), Error);
  CHECK_THROWS_AS(generate(sp), Error);
  sp.anchor_ratio = {0.5, 0.8};
  CHECK_THROWS_AS(check_synth_spec(sp), Error);
  sp = test::small_spec();
  sp.gauss_ratio = {0.9, 0.95, 1.0};  // above r(m^a_1)
  CHECK_THROWS_AS(check_synth_spec(sp), Error);
  sp = test::small_spec();
  sp.num_levels = 13;
  sp.anchor_ratio.assign(13, 1.0);
  CHECK_THROWS_AS(check_synth_spec(sp), Error);
}

TEST_CASE("spec text round-trips") {
  SynthSpec sp = test::small_spec(77, 4);
  sp.mode = SynthMode::adversarial;
  sp.trit_init = TritInit::uniform;
  sp.gauss_ratio = {0.1, 0.2, 0.4, 0.9};
  sp.lambdas = {4e-4f, 3e-4f, 2e-4f, 1e-4f};
  CHECK(parse_synth_spec(to_text(sp)) == sp);
  SynthSpec p = parse_synth_spec("# comment\nanchors = 12\nlevels=2\nanchor_ratio=0.5,1\n");
  CHECK(p.num_anchors == 12);
  CHECK(p.anchor_ratio == std::vector<double>{0.5, 1.0});
  CHECK_THROWS_AS(parse_synth_spec("bogus=1\n"), Error);
  CHECK_THROWS_AS(parse_synth_spec("anchors=ten\n"), Error);
}

TEST_CASE("calibrated scenes code cheaper than adversarial ones") {
  SynthSpec sp = test::small_spec(12);
  sp.num_anchors = 2000;
  double cal = estimate_rate(generate(sp), 1).new_anchor_bits;
  sp.mode = SynthMode::adversarial;
  double adv = estimate_rate(generate(sp), 1).new_anchor_bits;
  CHECK(cal < 0.95 * adv);
}

}
