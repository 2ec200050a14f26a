#include "doctest.h"
#include "helpers.hpp"
#include "rws/errors.hpp"
#include "rws/model_spec.hpp"

using namespace rws;

TEST_CASE("parsing architecture strings") {
  ModelSpec s = parse_model_spec("sbn:10-200-200");
  CHECK(s.family == "sbn");
  CHECK(s.widths_top_first == std::vector<int>{10, 200, 200});
  CHECK(s.nade_hidden == 0);

  ModelSpec a = parse_model_spec("arsbn:5");
  CHECK(a.family == "arsbn");
  CHECK(a.widths_top_first == std::vector<int>{5});

  ModelSpec n = parse_model_spec("nade@150:250");
  CHECK(n.family == "nade");
  CHECK(n.nade_hidden == 150);
  CHECK(n.widths_top_first == std::vector<int>{250});
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_model_spec("sbn"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("sbn:"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec(":5"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("gru:5"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("sbn:5-"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("sbn:5--3"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("sbn:0"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("sbn:-3"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("sbn:3x4"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("sbn@4:3"), ConfigError);  // hidden only for nade
  CHECK_THROWS_AS(parse_model_spec("nade@:3"), ConfigError);
  CHECK_THROWS_AS(parse_model_spec("nade@0:3"), ConfigError);
}

TEST_CASE("round trip back to string") {
  for (const char* str : {"sbn:10-200-200", "arsbn:5", "nade@150:250", "nade:4-6"}) {
    CHECK(to_string(parse_model_spec(str)) == str);
  }
}

TEST_CASE("generative build: top-first widths, visible layer appended") {
  GenerativeModel p = build_generative(parse_model_spec("sbn:10-20-30"), 40);
  REQUIRE(p.layers.size() == 4);
  CHECK(p.layers[0]->d_in() == 0);
  CHECK(p.layers[0]->d_out() == 10);
  CHECK(p.layers[1]->d_in() == 10);
  CHECK(p.layers[1]->d_out() == 20);
  CHECK(p.layers[2]->d_in() == 20);
  CHECK(p.layers[2]->d_out() == 30);
  CHECK(p.layers[3]->d_in() == 30);
  CHECK(p.layers[3]->d_out() == 40);
  CHECK(p.visible_width() == 40);
  CHECK(p.latent_widths() == std::vector<int>{30, 20, 10});
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("inference build: bottom-up from the visibles") {
  InferenceModel q = build_inference(parse_model_spec("sbn:10-20-30"), 40);
  REQUIRE(q.layers.size() == 3);
  CHECK(q.layers[0]->d_in() == 40);
  CHECK(q.layers[0]->d_out() == 30);
  CHECK(q.layers[1]->d_in() == 30);
  CHECK(q.layers[1]->d_out() == 20);
  CHECK(q.layers[2]->d_in() == 20);
  CHECK(q.layers[2]->d_out() == 10);
  CHECK(q.visible_width() == 40);
  CHECK(q.latent_widths() == std::vector<int>{30, 20, 10});
  CHECK_NOTHROW(q.validate());
  validate_pair(build_generative(parse_model_spec("sbn:10-20-30"), 40), q);
}

TEST_CASE("nade hidden width defaults to each layer's output width") {
  GenerativeModel p = build_generative(parse_model_spec("nade:3-5"), 7);
  auto& top = dynamic_cast<CNadeLayer&>(*p.layers[0]);
  auto& mid = dynamic_cast<CNadeLayer&>(*p.layers[1]);
  auto& vis = dynamic_cast<CNadeLayer&>(*p.layers[2]);
  CHECK(top.W.rows() == 3);
  CHECK(mid.W.rows() == 5);
  CHECK(vis.W.rows() == 7);
  GenerativeModel ph = build_generative(parse_model_spec("nade@11:3-5"), 7);
  CHECK(dynamic_cast<CNadeLayer&>(*ph.layers[0]).W.rows() == 11);
  CHECK(dynamic_cast<CNadeLayer&>(*ph.layers[2]).W.rows() == 11);
}

TEST_CASE("describe reproduces the spec string") {
  GenerativeModel p = build_generative(parse_model_spec("arsbn:4-6"), 9);
  CHECK(describe(p) == "arsbn:4-6");
  InferenceModel q = build_inference(parse_model_spec("arsbn:4-6"), 9);
  CHECK(describe(q) == "arsbn:4-6");
  GenerativeModel n = build_generative(parse_model_spec("nade@7:5"), 9);
  CHECK(describe(n) == "nade@7:5");
}
