#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "gradecast/tree_io.hpp"
#include "oracles.hpp"

namespace gc = gradecast;
using gc::cart::HyperParams;

namespace {

gc::cart::Tree depth_one() {
  gc::cart::Samples s(1);
  const std::vector<std::pair<double, int>> rows{{1, 0}, {2, 0}, {3, 1}, {4, 1}};
  for (const auto& [v, y] : rows) s.add(std::span<const double>(&v, 1), y ? gc::PassLabel::passed : gc::PassLabel::failed);
  return gc::cart::fit(s);
}

std::size_t count(const std::string& text, const std::regex& re) {
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

const std::regex kNodeLine(R"(^\d+ \[label=)", std::regex::multiline);
const std::regex kEdgeLine(R"(^\d+ -> \d+)", std::regex::multiline);

}  // namespace

TEST(Serialize, RoundTripIsStructurallyEqual) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    const auto t = oracle::random_table(rng, 10, 3);
    HyperParams hp;
    hp.criterion = i % 2 ? gc::cart::Criterion::entropy : gc::cart::Criterion::gini;
    if (i % 3 == 0) hp.max_depth = 2;
    const auto tree = gc::cart::fit(oracle::to_samples(t), hp);
    const auto text = gc::cart::serialize(tree);
    const auto back = gc::cart::deserialize(text);
    EXPECT_EQ(back, tree);
    EXPECT_EQ(gc::cart::serialize(back), text);
  }
}

TEST(Serialize, NonTerminatingThresholdsSurvive) {
  gc::cart::Samples s(1);
  const std::vector<double> xs{0.1, 0.2, 0.30000000000000004, 1.0 / 3.0};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s.add(std::span<const double>(&xs[i], 1), i % 2 ? gc::PassLabel::passed : gc::PassLabel::failed);
  }
  const auto tree = gc::cart::fit(s);
  EXPECT_EQ(gc::cart::deserialize(gc::cart::serialize(tree)), tree);
}

TEST(Deserialize, CountConservationViolation) {
  auto j = gc::cart::to_json(depth_one());
  j["nodes"][2]["counts"] = {0, 5};
  try {
    gc::cart::deserialize(j.dump());
    FAIL();
  } catch (const gc::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("count conservation"), std::string::npos);
  }
}

TEST(Deserialize, RejectsMalformedDocuments) {
  const auto good = gc::cart::to_json(depth_one());
  EXPECT_THROW(gc::cart::deserialize("{not json"), gc::FormatError);
  EXPECT_THROW(gc::cart::deserialize("[]"), gc::FormatError);

  auto j = good;
  j["format_version"] = 2;
  try {
    gc::cart::deserialize(j.dump());
    FAIL();
  } catch (const gc::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("format_version"), std::string::npos);
  }

  j = good;
  j["criterion"] = "gain_ratio";
  EXPECT_THROW(gc::cart::deserialize(j.dump()), gc::FormatError);

  j = good;
  j["nodes"][1]["left"] = 2;  // child pointer without a split
  EXPECT_THROW(gc::cart::deserialize(j.dump()), gc::FormatError);

  j = good;
  j["nodes"][0]["right"] = 1;  // node 1 gets two parents
  EXPECT_THROW(gc::cart::deserialize(j.dump()), gc::FormatError);

  j = good;
  j["nodes"][0]["counts"] = {-1, 3};
  EXPECT_THROW(gc::cart::deserialize(j.dump()), gc::FormatError);

  j = good;
  j["nodes"].erase(2);
  EXPECT_THROW(gc::cart::deserialize(j.dump()), gc::FormatError);

  j = good;
  j["nodes"][0]["split"]["feature"] = 3;
  EXPECT_THROW(gc::cart::deserialize(j.dump()), gc::FormatError);

  j = good;
  j["hyperparameters"].erase("min_samples_leaf");
  EXPECT_THROW(gc::cart::deserialize(j.dump()), gc::FormatError);
}

TEST(Deserialize, NodeOrderInFileIsFree) {
  auto j = gc::cart::to_json(depth_one());
  std::swap(j["nodes"][0], j["nodes"][2]);
  EXPECT_EQ(gc::cart::deserialize(j.dump()), depth_one());
}

TEST(Dot, SingleLeaf) {
  gc::cart::Samples s(1);
  const double v = 1;
  for (int i = 0; i < 5; ++i) s.add(std::span<const double>(&v, 1), gc::PassLabel::passed);
  const auto dot = gc::cart::to_dot(gc::cart::fit(s));
  EXPECT_EQ(count(dot, kNodeLine), 1u);
  EXPECT_EQ(count(dot, kEdgeLine), 0u);
  EXPECT_NE(dot.find("value = [0, 5]"), std::string::npos);
}

TEST(Dot, DepthOne) {
  const auto dot = gc::cart::to_dot(depth_one());
  EXPECT_EQ(count(dot, kNodeLine), 3u);
  EXPECT_EQ(count(dot, kEdgeLine), 2u);
  EXPECT_NE(dot.find("0 [label=\"X_0 <= 2.5\\ngini = 0.5\\nsamples = 4\\nvalue = [2, 2]\"]"), std::string::npos);
  // Left (condition true) edge first.
  EXPECT_LT(dot.find("0 -> 1"), dot.find("0 -> 2"));
  EXPECT_NE(dot.find("headlabel=\"True\""), std::string::npos);
}

TEST(Dot, NodeCountMatchesTree) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto tree = gc::cart::fit(oracle::to_samples(oracle::random_table(rng, 10, 3)));
    const auto dot = gc::cart::to_dot(tree);
    EXPECT_EQ(count(dot, kNodeLine), tree.size());
    EXPECT_EQ(count(dot, kEdgeLine), tree.size() - 1);
  }
}
