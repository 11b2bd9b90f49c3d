#include "testing.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <opencv2/imgproc.hpp>

#include "pathosr/errors.hpp"
#include "pathosr/metrics.hpp"
#include "pathosr/niqe.hpp"
#include "support.hpp"

using namespace pathosr;

namespace {

Image blur(const Image& img, double sigma) {
  cv::Mat m(img.height, img.width, CV_32FC(img.channels), const_cast<float*>(img.pixels.data()));
  cv::Mat out;
  cv::GaussianBlur(m, out, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT);
  Image r(img.height, img.width, img.channels);
  std::memcpy(r.pixels.data(), out.ptr<float>(), r.size() * sizeof(float));
  return r;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("psnr and ssim match brute-force evaluation on 20 random pairs") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> side(11, 40);
    std::uniform_real_distribution<double> sigma(0.01, 0.3);
    for (int t = 0; t < 20; ++t) {
      const int h = side(rng), w = side(rng), c = t % 4 == 0 ? 1 : 3;
      const Image a = t % 2 ? test::random_image(h, w, c, rng) : test::ihc_image().crop(t * 7, t * 11, h, w);
      const Image b = test::add_noise(a, sigma(rng), rng);
      if (c == 1 && t % 2 == 0) continue;  // IHC crops are colour
      CHECK(std::fabs(psnr(a, b) - test::oracle_psnr(a, b)) < 1e-6);
      CHECK(std::fabs(ssim(a, b) - test::oracle_ssim(a, b)) < 1e-6);
    }
  }

  TEST_CASE("psnr closed forms") {
    const Image a(16, 16, 3, 0.3f);
    CHECK(psnr(a, a) == kPsnrCapDb);
    Image b = a;
    for (float& v : b.pixels) v += 0.1f;
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK_THROWS_AS(psnr(a, Image(16, 15, 3)), ShapeError);
  }

  TEST_CASE("ssim closed forms") {
    const Image& x = test::ihc_image();
    CHECK(std::fabs(ssim(x, x) - 1.0) < 1e-9);
    const double c1 = 1e-4;
    const double expected = (2 * 0.2 * 0.4 + c1) / (0.2 * 0.2 + 0.4 * 0.4 + c1);
    CHECK(ssim(Image(32, 32, 1, 0.2f), Image(32, 32, 1, 0.4f)) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(expected == doctest::Approx(0.8001).epsilon(1e-4));
    CHECK_THROWS_AS(ssim(Image(10, 40, 1), Image(10, 40, 1)), ShapeError);
  }

  TEST_CASE("psnr and ssim are symmetric") {
    std::mt19937_64 rng(1);
    const Image a = test::random_image(20, 20, 3, rng), b = test::random_image(20, 20, 3, rng);
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  }

  TEST_CASE("more noise means lower psnr and ssim") {
    const Image x = test::ihc_image().crop(100, 100, 96, 96);
    double prev_p = 1e9, prev_s = 2;
    for (double sigma : {0.01, 0.02, 0.05, 0.1, 0.2}) {
      std::mt19937_64 rng(5);
      const Image y = test::add_noise(x, sigma, rng);
      const double p = psnr(x, y), s = ssim(x, y);
      CHECK(p < prev_p);
      CHECK(s < prev_s);
      prev_p = p;
      prev_s = s;
    }
  }

  TEST_CASE("perceptual index closed form") {
    CHECK(perceptual_index(10.0, 6.0) == 3.0);
    const NiqeModel model = default_niqe_model();
    CHECK_FALSE(perceptual_index(test::ihc_image(), model, nullptr).has_value());
    const MaScorer fixed = [](const Image&) { return std::optional<double>(8.0); };
    const MaScorer broken = [](const Image&) { return std::optional<double>(); };
    const double q = niqe(test::ihc_image(), model);
    CHECK(*perceptual_index(test::ihc_image(), model, &fixed) == doctest::Approx(0.5 * (2.0 + q)));
    CHECK_FALSE(perceptual_index(test::ihc_image(), model, &broken).has_value());
  }

  TEST_CASE("external Ma scorer parses the first number and survives failures") {
    const MaScorer echo = external_ma_scorer("echo 7.25 #");
    CHECK(echo(Image(8, 8, 3, 0.5f)).value() == doctest::Approx(7.25));
    const MaScorer missing = external_ma_scorer("/nonexistent/ma-scorer");
    CHECK_FALSE(missing(Image(8, 8, 3, 0.5f)).has_value());
  }
}

TEST_SUITE("niqe") {
  TEST_CASE("shipped model has the expected layout") {
    const NiqeModel m = default_niqe_model();
    CHECK(m.patch_size == 96);
    CHECK(m.mean.size() == static_cast<std::size_t>(kNiqeFeatureDim));
    CHECK(m.covariance.size() == static_cast<std::size_t>(kNiqeFeatureDim * kNiqeFeatureDim));
    for (int i = 0; i < kNiqeFeatureDim; ++i)
      for (int j = 0; j < kNiqeFeatureDim; ++j)
        CHECK(m.covariance[i * kNiqeFeatureDim + j] == doctest::Approx(m.covariance[j * kNiqeFeatureDim + i]));
  }

  TEST_CASE("model file round-trips and rejects foreign files") {
    test::TempDir dir;
    const NiqeModel m = default_niqe_model();
    m.save(dir / "m.bin");
    const NiqeModel back = NiqeModel::load(dir / "m.bin");
    CHECK(back.mean == m.mean);
    CHECK(back.covariance == m.covariance);
    std::ofstream(dir / "junk.bin") << "not a model";
    CHECK_THROWS(NiqeModel::load(dir / "junk.bin"));
  }

  TEST_CASE("features per patch") {
    const auto rows = niqe_patch_features(test::ihc_image(), 96);
    CHECK(rows.size() == 25);
    for (const auto& r : rows) CHECK(r.size() == static_cast<std::size_t>(kNiqeFeatureDim));
  }

  TEST_CASE("noise scores worse than natural content on 10 pairs") {
    const NiqeModel model = default_niqe_model();
    std::mt19937_64 rng(17);
    for (int i = 0; i < 10; ++i) {
      const Image natural = test::ihc_image().crop((i % 3) * 96, (i / 3) * 64 % 320, 192, 192);
      const Image noise = test::random_image(192, 192, 3, rng);
      const double qn = niqe(natural, model), qz = niqe(noise, model);
      CAPTURE(i);
      CHECK(qz > qn);
    }
  }

  TEST_CASE("heavy blur scores worse than the original") {
    const NiqeModel model = default_niqe_model();
    for (int i = 0; i < 3; ++i) {
      const Image natural = test::ihc_image().crop(i * 96, 64, 288, 288);
      CHECK(niqe(blur(natural, 4.0), model) > niqe(natural, model));
    }
  }

  TEST_CASE("niqe is deterministic and needs one full patch") {
    const NiqeModel model = default_niqe_model();
    const Image x = test::ihc_image().crop(0, 0, 200, 200);
    CHECK(niqe(x, model) == niqe(x, model));
    CHECK(niqe(x, model) >= 0.0);
    CHECK_THROWS_AS(niqe(Image(95, 200, 3, 0.5f), model), ShapeError);
  }

  TEST_CASE("fitting needs usable patches") {
    CHECK_THROWS_AS(fit_niqe_model({}, 96), std::invalid_argument);
    const NiqeModel m = fit_niqe_model({test::ihc_image()}, 96);
    CHECK(m.mean.size() == static_cast<std::size_t>(kNiqeFeatureDim));
  }
}
