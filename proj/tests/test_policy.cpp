#include "doctest.h"

#include <nlohmann/json.hpp>

#include "autoaug/codec.hpp"
#include "autoaug/errors.hpp"
#include "autoaug/ops.hpp"
#include "autoaug/policy.hpp"
#include "support.hpp"

using namespace autoaug;
using autoaug::testing::random_image;

namespace {

OperationSpec op(OpKind k, int p, int m) { return OperationSpec{k, p, m}; }

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("operation names round trip") {
    for (int i = 0; i < kNumOpKinds; ++i) {
      const OpKind k = op_from_index(i);
      CHECK(op_from_name(op_name(k)) == k);
    }
    CHECK_FALSE(op_from_name("invert").has_value());
    CHECK_THROWS_AS(op_from_index(16), ArgumentError);
    CHECK_FALSE(uses_magnitude(OpKind::Invert));
    CHECK(uses_magnitude(OpKind::Solarize));
  }

  TEST_CASE("parse single line") {
    const Policy p = parse_policy("(Invert,0.1,7)&(Contrast,0.2,6)\n");
    REQUIRE(p.size() == 1);
    CHECK(p[0].ops[0] == op(OpKind::Invert, 1, 7));
    CHECK(p[0].ops[1] == op(OpKind::Contrast, 2, 6));
    CHECK(p[0].ops[1].probability() == doctest::Approx(0.2));
  }

  TEST_CASE("parse skips comments and whitespace") {
    const Policy p = parse_policy("# header\n\n  ( Rotate , 1.0 , 9 ) & (Equalize,0,0)  \n");
    REQUIRE(p.size() == 1);
    CHECK(p[0].ops[0] == op(OpKind::Rotate, 10, 9));
    CHECK(serialize_policy(p) == "(Rotate,1.0,9)&(Equalize,0.0,0)\n");
  }

  TEST_CASE("parse errors carry the line") {
    auto line_of = [](std::string_view text) {
      try {
        parse_policy(text);
      } catch (const ParseError& e) {
        return e.line();
      }
      return std::size_t{999};
    };
    CHECK(line_of("(Invert,0.1,7)&(Contrast,0.2,6)\n(Blur,0.1,1)&(Invert,0.1,1)") == 2);
    CHECK(line_of("(Invert,0.15,7)&(Contrast,0.2,6)") == 1);
    CHECK(line_of("(Invert,0.1,10)&(Contrast,0.2,6)") == 1);
    CHECK(line_of("(Invert,1.1,1)&(Contrast,0.2,6)") == 1);
    CHECK(line_of("(Invert,0.1,1)") == 1);
    CHECK(line_of("(Invert,0.1,1)&(Invert,0.1,1)&(Invert,0.1,1)") == 1);
    CHECK(line_of("(Invert,0.1)&(Invert,0.1,1)") == 1);
    CHECK(line_of("(Invert,x,1)&(Invert,0.1,1)") == 1);
    CHECK(line_of("# only comments\n") == 0);
    CHECK(line_of("") == 0);
  }

  TEST_CASE("policy construction validates") {
    CHECK_THROWS_AS(Policy({}), ArgumentError);
    CHECK_THROWS_AS(Policy({SubPolicy{{op(OpKind::Invert, 11, 0), op(OpKind::Invert, 0, 0)}}}), ArgumentError);
    CHECK_THROWS_AS(Policy({SubPolicy{{op(OpKind::Invert, 0, -1), op(OpKind::Invert, 0, 0)}}}), ArgumentError);
  }

  TEST_CASE("golden policy files round trip") {
    for (const char* name : {"reduced_cifar10.txt", "reduced_svhn.txt", "reduced_imagenet.txt"}) {
      INFO(name);
      const std::string text = autoaug::testing::read_text(autoaug::testing::policy_dir() / name);
      const Policy p = parse_policy(text);
      CHECK(p.size() == 25);
      CHECK(serialize_policy(p) == text);
      CHECK(policy_from_json(policy_to_json(p)) == p);
    }
  }

  TEST_CASE("json form") {
    const Policy p = parse_policy("(Invert,0.1,7)&(Contrast,0.2,6)");
    const auto j = policy_to_json(p);
    CHECK(j.dump() == R"([[["Invert",0.1,7],["Contrast",0.2,6]]])");
    CHECK_THROWS_AS(policy_from_json(nlohmann::json::array()), ParseError);
    CHECK_THROWS_AS(policy_from_json(nlohmann::json::parse(R"([[["Invert",0.1,7]]])")), ParseError);
    CHECK_THROWS_AS(policy_from_json(nlohmann::json::parse(R"([[["Invert",0.12,7],["Invert",0.1,7]]])")), ParseError);
  }

  TEST_CASE("file io") {
    const auto dir = autoaug::testing::temp_dir("policy_io");
    const Policy p = parse_policy("(Solarize,0.5,3)&(Cutout,0.9,9)\n(Posterize,0.0,0)&(Color,1.0,4)\n");
    write_policy_file(dir / "p.txt", p);
    CHECK(read_policy_file(dir / "p.txt") == p);
    CHECK_THROWS_AS(read_policy_file(dir / "missing.txt"), ArgumentError);
  }

  TEST_CASE("search space size") {
    CHECK(search_space_size(1) == "3097600");
    CHECK(search_space_size(5) == "285184999433627773173760000000000");
    CHECK(std::stod(search_space_size(5)) == doctest::Approx(2.9e32).epsilon(0.02));
    CHECK_THROWS_AS(search_space_size(0), ArgumentError);
  }

  TEST_CASE("magnitude mapping") {
    RngStream rng(1, 1);
    CHECK(magnitude_value(OpKind::Solarize, 0, 32, rng) == 256.0);
    CHECK(magnitude_value(OpKind::Solarize, 9, 32, rng) == 0.0);
    CHECK(magnitude_value(OpKind::Posterize, 0, 32, rng) == 8.0);
    CHECK(magnitude_value(OpKind::Posterize, 9, 32, rng) == 4.0);
    CHECK(magnitude_value(OpKind::SamplePairing, 9, 32, rng) == doctest::Approx(0.4));
    CHECK(magnitude_value(OpKind::Cutout, 9, 331, rng) == doctest::Approx(60.0));
    CHECK(magnitude_value(OpKind::Cutout, 9, 32, rng) == doctest::Approx(60.0 * 32 / 331));
    for (int i = 0; i < 20; ++i) {
      CHECK(std::fabs(magnitude_value(OpKind::Rotate, 9, 32, rng)) == doctest::Approx(30.0));
      CHECK(std::fabs(magnitude_value(OpKind::ShearX, 9, 32, rng)) == doctest::Approx(0.3));
      CHECK(std::fabs(magnitude_value(OpKind::TranslateY, 9, 331, rng)) == doctest::Approx(150.0));
      const double f = magnitude_value(OpKind::Contrast, 9, 32, rng);
      CHECK((f == doctest::Approx(0.1) || f == doctest::Approx(1.9)));
    }
    CHECK(magnitude_value(OpKind::Rotate, 0, 32, rng) == 0.0);
    CHECK_THROWS_AS(magnitude_value(OpKind::Rotate, 10, 32, rng), ArgumentError);
  }

  TEST_CASE("probability gates") {
    const ImageBuffer img = random_image(8, 8, 1);
    const SubPolicy never{{op(OpKind::Invert, 0, 0), op(OpKind::Equalize, 0, 0)}};
    const SubPolicy always{{op(OpKind::Invert, 10, 0), op(OpKind::Invert, 10, 0)}};
    const SubPolicy once{{op(OpKind::Invert, 10, 0), op(OpKind::Invert, 0, 0)}};
    for (std::uint64_t s = 0; s < 50; ++s) {
      RngStream rng(s, 0);
      CHECK(apply_sub_policy(never, img, rng) == img);
      CHECK(apply_sub_policy(always, img, rng) == img);
      CHECK(apply_sub_policy(once, img, rng) == invert(img));
    }
  }

  TEST_CASE("sub-policy draw replays exactly") {
    const ImageBuffer img = random_image(16, 16, 2);
    const SubPolicy sp{{op(OpKind::Rotate, 6, 5), op(OpKind::Cutout, 4, 8)}};
    for (std::uint64_t s = 0; s < 30; ++s) {
      RngStream a(s, 9), b(s, 9);
      ImageBuffer expect = img;
      if (b.uniform() * 10.0 < 6) {
        expect = affine(expect, AffineKind::rotate, b.sign() * (5 / 9.0) * 30.0);
      }
      if (b.uniform() * 10.0 < 4) {
        expect = cutout(expect, static_cast<int>(std::lround((8 / 9.0) * 60.0 * 16 / 331)), b);
      }
      CHECK(apply_sub_policy(sp, img, a) == expect);
    }
  }

  TEST_CASE("apply policy is deterministic per stream") {
    const Policy p = read_policy_file(autoaug::testing::policy_dir() / "reduced_cifar10.txt");
    const ImageBuffer img = random_image(32, 32, 3);
    for (std::uint64_t s = 0; s < 20; ++s) {
      RngStream a(s, 0), b(s, 0);
      const ImageBuffer x = apply_policy(p, img, a);
      CHECK(x == apply_policy(p, img, b));
      CHECK(x.same_shape(img));
    }
  }

  TEST_CASE("sample pairing partner excludes self") {
    std::vector<ImageBuffer> batch{ImageBuffer(2, 2, 0), ImageBuffer(2, 2, 200)};
    const OperationSpec pair = op(OpKind::SamplePairing, 10, 9);
    for (std::uint64_t s = 0; s < 20; ++s) {
      RngStream rng(s, 0);
      const ImageBuffer out = apply_operation(pair, batch[0], rng, BatchContext{batch, 0});
      CHECK(out.data()[0] == 80);
    }
    RngStream rng(0, 0);
    const std::vector<ImageBuffer> alone{ImageBuffer(2, 2, 10)};
    CHECK(apply_operation(pair, alone[0], rng, BatchContext{alone, 0}) == alone[0]);
    CHECK(apply_operation(pair, alone[0], rng, BatchContext{}) == alone[0]);
  }
}

TEST_SUITE("codec") {
  TEST_CASE("token layout") {
    CHECK(kTokensPerPolicy == 30);
    CHECK(vocab_size(std::size_t{0}) == 16);
    CHECK(vocab_size(std::size_t{1}) == 11);
    CHECK(vocab_size(std::size_t{2}) == 10);
    CHECK(vocab_size(std::size_t{29}) == 10);
  }

  TEST_CASE("decode and encode are inverse") {
    RngStream rng(4, 0);
    for (int i = 0; i < 200; ++i) {
      const TokenSequence t = random_tokens(rng);
      validate_tokens(t);
      const Policy p = decode_tokens(t);
      CHECK(p.size() == 5);
      CHECK(encode_policy(p) == t);
    }
  }

  TEST_CASE("decode maps tokens to fields") {
    TokenSequence t{};
    t[0] = 6;
    t[1] = 3;
    t[2] = 7;
    t[3] = 15;
    t[4] = 10;
    t[5] = 9;
    const Policy p = decode_tokens(t);
    CHECK(p[0].ops[0] == OperationSpec{OpKind::Invert, 3, 7});
    CHECK(p[0].ops[1] == OperationSpec{OpKind::SamplePairing, 10, 9});
    CHECK(p[4].ops[1] == OperationSpec{OpKind::ShearX, 0, 0});
  }

  TEST_CASE("invalid tokens") {
    TokenSequence t{};
    t[0] = 16;
    CHECK_THROWS_AS(decode_tokens(t), DecodeError);
    t[0] = 0;
    t[1] = 11;
    CHECK_THROWS_AS(decode_tokens(t), DecodeError);
    t[1] = 0;
    t[2] = -1;
    CHECK_THROWS_AS(decode_tokens(t), DecodeError);
    const std::vector<int> short_seq(29, 0);
    CHECK_THROWS_AS(decode_tokens(std::span<const int>(short_seq)), DecodeError);
    CHECK_THROWS_AS(encode_policy(parse_policy("(Invert,0.1,1)&(Invert,0.1,1)")), ArgumentError);
  }

  TEST_CASE("mutate changes at most one position") {
    RngStream rng(5, 0);
    TokenSequence t = random_tokens(rng);
    int changed_total = 0;
    for (int i = 0; i < 300; ++i) {
      const TokenSequence m = mutate(t, rng);
      validate_tokens(m);
      int diff = 0;
      for (std::size_t k = 0; k < t.size(); ++k) diff += m[k] != t[k];
      CHECK(diff <= 1);
      changed_total += diff;
      t = m;
    }
    CHECK(changed_total > 200);
  }

  TEST_CASE("random tokens cover every vocabulary value") {
    RngStream rng(6, 0);
    std::array<std::array<int, 16>, 3> seen{};
    for (int i = 0; i < 400; ++i) {
      const TokenSequence t = random_tokens(rng);
      for (std::size_t k = 0; k < t.size(); ++k) seen[k % 3][static_cast<std::size_t>(t[k])]++;
    }
    for (std::size_t s = 0; s < 3; ++s) {
      for (int v = 0; v < vocab_size(s); ++v) CHECK(seen[s][static_cast<std::size_t>(v)] > 0);
    }
  }
}
