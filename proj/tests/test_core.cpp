#include <gtest/gtest.h>

#include <functional>
#include <sstream>

#include "cfdea/core.hpp"
#include "fixtures.hpp"

using namespace cfdea;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInternal;
}

}  // namespace

TEST(PanelCsv, ParsesFourFirms) {
  const Panel p = fixtures::four_firms();
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p.num_inputs(), 2u);
  EXPECT_EQ(p.num_outputs(), 1u);
  EXPECT_EQ(p.id(2), "3");
  EXPECT_DOUBLE_EQ(p.input(3)[0], 2.5);
  EXPECT_DOUBLE_EQ(p.input(3)[1], 1.25);
  EXPECT_EQ(p.input_names(), (std::vector<std::string>{"x1", "x2"}));
  EXPECT_EQ(p.output_names(), (std::vector<std::string>{"y"}));
  EXPECT_EQ(p.index_of("4"), 3u);
  EXPECT_FALSE(p.index_of("nope").has_value());
}

TEST(PanelCsv, RoundTripsThroughWriter) {
  const Panel p = fixtures::four_firms();
  std::ostringstream os;
  write_panel_csv(os, p);
  const Panel q = parse_panel_csv(os.str()).panel;
  ASSERT_EQ(q.size(), p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_EQ(q.id(k), p.id(k));
    for (std::size_t i = 0; i < p.num_inputs(); ++i) EXPECT_EQ(q.input(k)[i], p.input(k)[i]);
    EXPECT_EQ(q.output(k)[0], p.output(k)[0]);
  }
}

TEST(PanelCsv, RejectsMalformedInput) {
  EXPECT_EQ(code_of([] { parse_panel_csv(""); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_panel_csv("id,in:a,out:b\n1,1,1\n1,2,2\n"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_panel_csv("id,in:a,out:b\n1,-1,1\n"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_panel_csv("id,in:a,out:b\n1,nan,1\n"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_panel_csv("id,in:a,out:b\n1,inf,1\n"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_panel_csv("id,in:a,out:b\n1,1\n"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_panel_csv("id,in:a,out:b\n1,1,x\n"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_panel_csv("id,a,out:b\n1,1,1\n"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_panel_csv("id,in:a\n1,1\n"); }), ErrorCode::kInvalidArgument);
}

TEST(PanelCsv, DropsZeroInputRows) {
  const PanelBuild pb = parse_panel_csv("id,in:a,in:b,out:y\nA,1,2,1\nB,0,2,1\nC,3,1,2\n");
  EXPECT_EQ(pb.panel.size(), 2u);
  EXPECT_EQ(pb.removed, (std::vector<std::string>{"B"}));
  EXPECT_EQ(pb.panel.ids(), (std::vector<std::string>{"A", "C"}));
  EXPECT_TRUE(pb.panel.inputs_strictly_positive());
}

TEST(PanelCsv, ZeroOutputIsKept) {
  const PanelBuild pb = parse_panel_csv("id,in:a,out:y\nA,1,0\nB,2,1\n");
  EXPECT_EQ(pb.panel.size(), 2u);
  EXPECT_TRUE(pb.removed.empty());
}

TEST(PanelCsv, AllRowsRemovedIsAnError) {
  EXPECT_EQ(code_of([] { parse_panel_csv("id,in:a,out:y\nA,0,1\n"); }),
            ErrorCode::kInvalidArgument);
}

TEST(Panel, ConstructorValidates) {
  Matrix in(2, 1);
  Matrix out(2, 1);
  in(0, 0) = 1;
  in(1, 0) = 2;
  out(0, 0) = 1;
  out(1, 0) = 1;
  EXPECT_NO_THROW(Panel({"a", "b"}, in, out));
  EXPECT_THROW(Panel({"a", "a"}, in, out), Error);
  EXPECT_THROW(Panel({"a"}, in, out), Error);
  in(1, 0) = -1;
  EXPECT_THROW(Panel({"a", "b"}, in, out), Error);
}

TEST(Normalize, DividesByColumnMaximum) {
  const PanelBuild pb = parse_panel_csv("id,in:a,out:y\nA,2,1\nB,4,3\n");
  const NormalizedPanel np = normalize_max(pb.panel);
  EXPECT_DOUBLE_EQ(np.panel.input(0)[0], 0.5);
  EXPECT_DOUBLE_EQ(np.panel.input(1)[0], 1.0);
  EXPECT_DOUBLE_EQ(np.record.input_scale[0], 4.0);
  // Outputs untouched for the input side.
  EXPECT_DOUBLE_EQ(np.panel.output(1)[0], 3.0);
  EXPECT_DOUBLE_EQ(np.record.output_scale[0], 1.0);
}

TEST(Normalize, FourFirmMaxima) {
  const NormalizedPanel np = normalize_max(fixtures::four_firms());
  EXPECT_DOUBLE_EQ(np.record.input_scale[0], 2.5);
  EXPECT_DOUBLE_EQ(np.record.input_scale[1], 1.25);
  EXPECT_NEAR(np.panel.input(0)[0], 0.2, 1e-15);
  EXPECT_NEAR(np.panel.input(0)[1], 0.8, 1e-15);
}

TEST(Normalize, OutputSide) {
  const PanelBuild pb = parse_panel_csv("id,in:a,out:y,out:z\nA,2,1,0\nB,4,4,0\n");
  const NormalizedPanel np = normalize_max(pb.panel, Orientation::kOutput);
  EXPECT_DOUBLE_EQ(np.panel.output(0)[0], 0.25);
  EXPECT_DOUBLE_EQ(np.record.output_scale[1], 1.0);  // all-zero column
  EXPECT_DOUBLE_EQ(np.panel.input(1)[0], 4.0);
}

TEST(Normalize, RoundTripProperty) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    const Panel p = fixtures::random_panel(rng, 6, 3, 2);
    const NormalizedPanel np = normalize_max(p);
    const Panel back = np.record.invert(np.panel);
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(back.input(k)[i], p.input(k)[i], 1e-12);
        EXPECT_LE(np.panel.input(k)[i], 1.0);
      }
      const auto v = np.record.invert_inputs(np.record.apply_inputs(p.input(k)));
      for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(v[i], p.input(k)[i], 1e-12);
    }
  }
}

TEST(CostWeights, Presets) {
  EXPECT_EQ(CostWeights::preset("l2").nu2, 1.0);
  EXPECT_EQ(CostWeights::preset("l1").nu1, 1.0);
  EXPECT_EQ(CostWeights::preset("l0+l2").nu2, 1e5);
  EXPECT_EQ(CostWeights::preset("l0+(l2)").nu2, 1e-3);
  EXPECT_EQ(CostWeights::preset("l0+(l2)").nu0, 1.0);
  EXPECT_THROW(CostWeights::preset("l3"), Error);
}

TEST(CostWeights, Validation) {
  EXPECT_NO_THROW(CostWeights::l2().validate(2));
  EXPECT_THROW((CostWeights{0, 0, 0, {}}).validate(2), Error);
  EXPECT_THROW((CostWeights{-1, 0, 1, {}}).validate(2), Error);
  EXPECT_THROW((CostWeights{0, 0, kInf, {}}).validate(2), Error);
  EXPECT_THROW((CostWeights{0, 0, 1, {1.0}}).validate(2), Error);
  EXPECT_THROW((CostWeights{0, 0, 1, {1.0, 0.0}}).validate(2), Error);
  EXPECT_NO_THROW((CostWeights{0, 0, 1, {1.0, 2.0}}).validate(2));
}

TEST(BigM, Validation) {
  EXPECT_NO_THROW(BigMConfig{}.validate());
  BigMConfig m;
  m.m_zero = 0.0;
  EXPECT_THROW(m.validate(), Error);
  m = BigMConfig{};
  m.m_frontier = kInf;
  EXPECT_THROW(m.validate(), Error);
}

TEST(Parse, TechnologyAndOrientation) {
  EXPECT_EQ(parse_technology("vrs"), Technology::kVrs);
  EXPECT_EQ(parse_orientation("output"), Orientation::kOutput);
  EXPECT_THROW(parse_technology("drs"), Error);
}
