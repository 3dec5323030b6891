#include "tactus/grid_io.hpp"
#include "tactus/image_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <gtest/gtest.h>

using namespace tactus;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::path(::testing::TempDir()) / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TactileImage noisy_image(int w, int h, unsigned seed) {
  TactileImage img(w, h);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& pl : img.plane)
    for (auto& v : pl.data()) v = u(rng);
  return img;
}

}  // namespace

TEST(GridIO, RoundTripsDoubleChannels) {
  GridD a(7, 5), b(7, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      a(x, y) = 0.1 * x - 2.5 * y;
      b(x, y) = std::sin(x + 0.3 * y);
    }
  const auto path = temp_path("pair.tgrid");
  write_grid_file<double>(path, {&a, &b});
  const auto back = read_grid_file<double>(path);
  ASSERT_EQ(back.size(), 2u);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      EXPECT_EQ(back[0](x, y), a(x, y));
      EXPECT_EQ(back[1](x, y), b(x, y));
    }
}

TEST(GridIO, RoundTripsFloatExactly) {
  Grid<float> g(3, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 3; ++x) g(x, y) = 1.0f / (1 + x + 3 * y);
  const auto path = temp_path("single.tgrid");
  write_grid_file<float>(path, {&g});
  const auto back = read_grid_file<float>(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].data(), g.data());
}

TEST(GridIO, DepthAndGradientHelpers) {
  DepthMap d(9, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 9; ++x) d.z(x, y) = 0.01 * x * y;
  const auto dpath = temp_path("depth.tgrid");
  save_depth(dpath, d);
  const DepthMap d2 = load_depth(dpath);
  EXPECT_EQ(d2.z.data(), d.z.data());

  GradientField g(9, 6);
  g.p(4, 4) = 0.7;
  g.q(1, 2) = -0.3;
  const auto gpath = temp_path("grad.tgrid");
  save_gradients(gpath, g);
  const GradientField g2 = load_gradients(gpath);
  EXPECT_EQ(g2.p.data(), g.p.data());
  EXPECT_EQ(g2.q.data(), g.q.data());
}

TEST(GridIO, RejectsWrongMagicAndChannelCount) {
  const auto path = temp_path("broken.tgrid");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTAGRID" << std::string(64, '\0');
  }
  EXPECT_THROW(read_grid_file<double>(path), InputError);

  GradientField g(4, 4);
  const auto gpath = temp_path("two.tgrid");
  save_gradients(gpath, g);
  EXPECT_THROW(load_depth(gpath), InputError);  // 2 channels, expects 1
}

TEST(GridIO, MissingFileIsInputError) {
  EXPECT_THROW(read_grid_file<double>(temp_path("never_written.tgrid")),
               InputError);
}

TEST(GridIO, CsvUsesStableNumberFormat) {
  GridD g(2, 2);
  g(0, 0) = 1.0 / 3.0;
  g(1, 0) = -2.0;
  g(0, 1) = 0.0;
  g(1, 1) = 12345.678;
  const auto path = temp_path("grid.csv");
  write_grid_csv(path, g, "v");
  const std::string text = slurp(path);
  EXPECT_NE(text.find("x,y,v\n"), std::string::npos);
  EXPECT_NE(text.find("0.333333333"), std::string::npos);
  EXPECT_NE(text.find("12345.678"), std::string::npos);
  // Two writes of the same grid are byte-identical.
  const auto path2 = temp_path("grid2.csv");
  write_grid_csv(path2, g, "v");
  EXPECT_EQ(slurp(path), slurp(path2));
}

TEST(ImageIO, Png16BitRoundTripIsNearLossless) {
  const TactileImage img = noisy_image(33, 21, 11);
  const auto path = temp_path("frame16.png");
  write_png(path, img, 16);
  const TactileImage back = read_png(path);
  ASSERT_TRUE(back.same_size(img));
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.plane[c].data().size(); ++i)
      EXPECT_NEAR(back.plane[c].data()[i], img.plane[c].data()[i],
                  0.51 / 65535.0);
}

TEST(ImageIO, Png8BitRoundTripWithinQuantization) {
  const TactileImage img = noisy_image(16, 16, 3);
  const auto path = temp_path("frame8.png");
  write_png(path, img, 8);
  const TactileImage back = read_png(path);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.plane[c].data().size(); ++i)
      EXPECT_NEAR(back.plane[c].data()[i], img.plane[c].data()[i],
                  0.51 / 255.0);
}

TEST(ImageIO, PngWriteIsDeterministic) {
  const TactileImage img = noisy_image(40, 30, 5);
  const auto p1 = temp_path("det1.png");
  const auto p2 = temp_path("det2.png");
  write_png(p1, img, 16);
  write_png(p2, img, 16);
  EXPECT_EQ(slurp(p1), slurp(p2));
}

TEST(ImageIO, PpmRoundTrip) {
  const TactileImage img = noisy_image(12, 9, 8);
  const auto path = temp_path("frame.ppm");
  write_ppm(path, img, 65535);
  const TactileImage back = read_ppm(path);
  ASSERT_TRUE(back.same_size(img));
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.plane[c].data().size(); ++i)
      EXPECT_NEAR(back.plane[c].data()[i], img.plane[c].data()[i],
                  0.51 / 65535.0);
}

TEST(ImageIO, DispatchesOnExtension) {
  const TactileImage img = noisy_image(10, 10, 2);
  const auto ppm = temp_path("auto.ppm");
  const auto png = temp_path("auto.png");
  write_image(ppm, img);
  write_image(png, img);
  EXPECT_TRUE(read_image(ppm).same_size(img));
  EXPECT_TRUE(read_image(png).same_size(img));
}

TEST(ImageIO, MissingImageIsInputError) {
  EXPECT_THROW(read_image(temp_path("no_such_image.png")), InputError);
}
