#include <gtest/gtest.h>

#include <string>

#include "lossforge/error.hpp"
#include "lossforge/plot.hpp"

namespace lossforge {
namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

std::vector<Series> twelve() {
  std::vector<Series> out;
  for (int i = 0; i < 12; ++i) {
    out.push_back({"loss " + std::to_string(i), {0, 500, 1000}, {0.1, 0.05 * i, 0.08 * i}});
  }
  return out;
}

TEST(Svg, OnePolylineAndLegendEntryPerSeries) {
  PlotOptions o;
  o.title = "curves";
  o.x_label = "iteration";
  o.y_label = "test_acc";
  const auto svg = render_svg(twelve(), o);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(svg, "<polyline"), 12u);
  EXPECT_EQ(count(svg, "class=\"legend\""), 12u);
  EXPECT_NE(svg.find(">iteration<"), std::string::npos);
  EXPECT_NE(svg.find(">test_acc<"), std::string::npos);
  EXPECT_NE(svg.find(">curves<"), std::string::npos);
}

TEST(Svg, DeterministicBytes) {
  EXPECT_EQ(render_svg(twelve(), {}), render_svg(twelve(), {}));
}

TEST(Svg, SinglePointAndEscaping) {
  const std::vector<Series> s{{"a<b & c", {1}, {2}}};
  const auto svg = render_svg(s, {});
  EXPECT_EQ(count(svg, "<circle"), 1u);
  EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
}

TEST(Svg, Errors) {
  EXPECT_THROW(render_svg({}, {}), DomainError);
  const std::vector<Series> empty{{"x", {}, {}}};
  EXPECT_THROW(render_svg(empty, {}), DomainError);
  const std::vector<Series> ragged{{"x", {1, 2}, {1}}};
  EXPECT_THROW(render_svg(ragged, {}), ShapeError);
}

}  // namespace
}  // namespace lossforge
