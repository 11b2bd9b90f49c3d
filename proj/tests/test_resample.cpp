#include "testing.hpp"

#include <cmath>
#include <random>

#include "pathosr/errors.hpp"
#include "pathosr/resample.hpp"
#include "support.hpp"

using namespace pathosr;

namespace {

// Keys cubic written out independently of the library.
double keys(double x) {
  const double a = -0.5;
  x = std::fabs(x);
  if (x <= 1.0) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
  if (x < 2.0) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
  return 0.0;
}

// Direct 2D evaluation of the antialiased downscale: every input pixel is
// weighted by the product kernel, out-of-image taps simply do not exist and
// the weights are normalised over what remains.
double oracle_downscale(const Image& img, int s, int orow, int ocol, int ch) {
  const double cr = (orow + 0.5) * s - 0.5, cc = (ocol + 0.5) * s - 0.5;
  double acc = 0, total = 0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double w = keys((r - cr) / s) * keys((c - cc) / s);
      acc += w * img.at(r, c, ch);
      total += w;
    }
  }
  return acc / total;
}

}  // namespace

TEST_SUITE("resample") {
  TEST_CASE("cubic kernel matches the Keys polynomial") {
    for (double x = -2.5; x <= 2.5; x += 0.125) CHECK(cubic_kernel(x) == doctest::Approx(keys(x)).epsilon(1e-12));
    CHECK(cubic_kernel(0.0) == 1.0);
    CHECK(cubic_kernel(1.0) == 0.0);
  }

  TEST_CASE("downscale of an impulse equals the direct kernel sum") {
    for (int s : {2, 3, 4}) {
      Image img(24, 20, 1, 0.0f);
      img.at(11, 7, 0) = 1.0f;
      const Image out = downscale_bicubic(img, s);
      for (int r = 0; r < out.height; ++r) {
        for (int c = 0; c < out.width; ++c) {
          CHECK(std::fabs(out.at(r, c, 0) - oracle_downscale(img, s, r, c, 0)) < 1e-4);
        }
      }
    }
  }

  TEST_CASE("downscale of random content equals the direct kernel sum") {
    std::mt19937_64 rng(7);
    const Image img = test::random_image(17, 23, 3, rng);
    const Image out = downscale_bicubic(img, 4);
    REQUIRE(out.height == 5);
    REQUIRE(out.width == 6);
    for (int r = 0; r < out.height; ++r)
      for (int c = 0; c < out.width; ++c)
        for (int k = 0; k < 3; ++k) CHECK(std::fabs(out.at(r, c, k) - oracle_downscale(img, 4, r, c, k)) < 1e-4);
  }

  TEST_CASE("constant images stay constant") {
    const Image img = test::constant_image(33, 30, 3, 0.37f);
    for (int s : kSupportedScales) {
      for (const Image& out : {downscale_bicubic(img, s), upscale_bicubic(img, s), upscale_nearest(img, s)}) {
        for (float v : out.pixels) CHECK(std::fabs(v - 0.37f) < 1e-6);
      }
    }
  }

  TEST_CASE("downscaling preserves the mean of smooth content") {
    const Image& hr = test::ihc_image();
    for (int s : kSupportedScales) {
      const Image lr = synthesize_lr(hr, s);
      double a = 0, b = 0;
      for (float v : hr.pixels) a += v;
      for (float v : lr.pixels) b += v;
      CHECK(std::fabs(a / hr.size() - b / lr.size()) < 1e-3);
    }
  }

  TEST_CASE("LR shapes use ceiling division") {
    const Image hr(256, 256, 3, 0.5f);
    const Image lr = synthesize_lr(hr, 4);
    CHECK(lr.height == 64);
    CHECK(lr.width == 64);
    const Image odd(85, 86, 1, 0.5f);
    CHECK(synthesize_lr(odd, 3).height == 29);
    CHECK(synthesize_lr(odd, 3).width == 29);
    CHECK(synthesize_lr(odd, 8).height == 11);
  }

  TEST_CASE("synthesize_lr validates its inputs") {
    const Image hr(16, 16, 3, 0.5f);
    CHECK_THROWS_AS(synthesize_lr(hr, 5), ConfigError);
    CHECK_THROWS_AS(synthesize_lr(hr, 16), ConfigError);
    CHECK_THROWS_AS(synthesize_lr(Image(3, 16, 3, 0.5f), 4), ShapeError);
  }

  TEST_CASE("synthesized LR is clamped to the unit range") {
    Image hr(32, 32, 1, 0.0f);
    for (int r = 0; r < 32; ++r)
      for (int c = 16; c < 32; ++c) hr.at(r, c, 0) = 1.0f;
    const Image lr = synthesize_lr(hr, 2);
    for (float v : lr.pixels) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }

  TEST_CASE("nearest upscale replicates pixels") {
    std::mt19937_64 rng(3);
    const Image lr = test::random_image(5, 7, 3, rng);
    const Image up = upscale_nearest(lr, 3);
    REQUIRE(up.height == 15);
    for (int r = 0; r < 15; ++r)
      for (int c = 0; c < 21; ++c)
        for (int k = 0; k < 3; ++k) CHECK(up.at(r, c, k) == lr.at(r / 3, c / 3, k));
  }

  TEST_CASE("upscale_to crops back to the HR size") {
    const Image hr(85, 86, 3, 0.2f);
    const Image lr = synthesize_lr(hr, 4);
    const Image up = upscale_to(lr, 4, hr.height, hr.width, true);
    CHECK(up.same_shape(hr));
    CHECK_THROWS_AS(upscale_to(lr, 4, 200, 86, true), ShapeError);
  }

  TEST_CASE("bicubic upscale beats nearest on natural content") {
    const Image hr = test::ihc_image().crop(0, 0, 128, 128);
    const Image lr = synthesize_lr(hr, 2);
    const Image bic = upscale_to(lr, 2, 128, 128, true);
    const Image nn = upscale_to(lr, 2, 128, 128, false);
    double e_bic = 0, e_nn = 0;
    for (std::size_t i = 0; i < hr.size(); ++i) {
      e_bic += std::pow(bic.pixels[i] - hr.pixels[i], 2);
      e_nn += std::pow(nn.pixels[i] - hr.pixels[i], 2);
    }
    CHECK(e_bic < e_nn);
  }
}
