#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hedseg/boxes.hpp"
#include "hedseg/error.hpp"
#include "hedseg/eval.hpp"
#include "hedseg/postprocess.hpp"
#include "oracles.hpp"

using namespace hedseg;
namespace fs = std::filesystem;

namespace {

Mask square(int rows, int cols, int r0, int c0, int size) {
  Mask m(rows, cols, 0);
  for (int r = r0; r < r0 + size; ++r)
    for (int c = c0; c < c0 + size; ++c) m(r, c) = 1;
  return m;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hedseg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(LargestComponent, KeepsBiggerBlob) {
  Mask m = square(12, 12, 0, 0, 2);
  const Mask big = square(12, 12, 5, 5, 4);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] |= big[i];
  EXPECT_EQ(largest_component(m), big);
}

TEST(LargestComponent, DiagonalPixelsAreConnected) {
  Mask m(5, 5, 0);
  for (int i = 0; i < 5; ++i) m(i, i) = 1;
  EXPECT_EQ(largest_component(m), m);
}

TEST(LargestComponent, TieGoesToFirstInRasterOrder) {
  Mask m(6, 6, 0);
  m(0, 4) = m(0, 5) = 1;
  m(4, 0) = m(4, 1) = 1;
  Mask want(6, 6, 0);
  want(0, 4) = want(0, 5) = 1;
  EXPECT_EQ(largest_component(m), want);
}

TEST(LargestComponent, EmptyStaysEmpty) { EXPECT_EQ(largest_component(Mask(4, 4, 0)), Mask(4, 4, 0)); }

TEST(FillHoles, FillsEnclosedKeepsBorderConnected) {
  Mask ring = square(9, 9, 1, 1, 5);
  ring(3, 3) = 0;  // enclosed hole
  Mask notch = ring;
  notch(1, 3) = 0;  // opens onto the outside at (0, 3)
  const Mask filled = fill_holes(ring);
  EXPECT_EQ(filled(3, 3), 1);
  EXPECT_EQ(fill_holes(notch)(1, 3), 0);
}

TEST(FillHoles, DiagonalLeakIsStillAHole) {
  // Background connected to the outside only diagonally is enclosed under 4-connectivity.
  Mask m = square(7, 7, 1, 1, 5);
  m(3, 3) = 0;
  m(2, 2) = 0;
  m(1, 1) = 0;
  EXPECT_EQ(fill_holes(m), oracle::fill_holes(m));
}

TEST(FillHoles, RandomAgreesWithOracle) {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const Mask m = oracle::random_mask(20, 17, rng.uniform(0.3, 0.8), rng);
    EXPECT_EQ(fill_holes(m), oracle::fill_holes(m));
    EXPECT_EQ(largest_component(m), oracle::largest_component(m));
  }
}

TEST(Refine, PicksHighestScoringLiverDetection) {
  std::vector<InstanceDetection> dets(2);
  dets[0].class_id = kLiverClass;
  dets[0].score = 0.8;
  dets[0].mask = square(10, 10, 0, 0, 3);
  dets[1].class_id = kLiverClass;
  dets[1].score = 0.95;
  dets[1].mask = square(10, 10, 5, 5, 4);
  const FinalMask f = refine(dets, 10, 10);
  EXPECT_EQ(f.mask, dets[1].mask);
  EXPECT_DOUBLE_EQ(f.score, 0.95);
  const FinalMask none = refine({}, 7, 9);
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(none.mask.rows(), 7);
  EXPECT_EQ(none.mask.cols(), 9);
}

TEST(Dice, KnownValues) {
  const Mask a = square(8, 8, 0, 0, 4);  // 16 px
  const Mask b = square(8, 8, 2, 0, 4);  // overlap 8 px
  EXPECT_DOUBLE_EQ(dice_coefficient(a, a), 1.0);
  EXPECT_DOUBLE_EQ(dice_coefficient(a, b), 0.5);
  EXPECT_DOUBLE_EQ(dice_coefficient(Mask(8, 8, 0), Mask(8, 8, 0)), 1.0);
  EXPECT_DOUBLE_EQ(dice_coefficient(a, Mask(8, 8, 0)), 0.0);
  EXPECT_THROW(dice_coefficient(a, Mask(4, 8, 0)), Error);
}

TEST(Report, MeanStdPopulationAndSample) {
  const MeanStd p = mean_std({1.0, 0.0});
  EXPECT_DOUBLE_EQ(p.mean, 0.5);
  EXPECT_DOUBLE_EQ(p.std, 0.5);
  const MeanStd s = mean_std({1.0, 0.0}, false);
  EXPECT_NEAR(s.std, std::sqrt(0.5), 1e-15);
  EXPECT_EQ(format_mean_std(0.94, 0.03), "0.94±0.03");
}

TEST(Report, RowsPerModalityAndPatient) {
  std::vector<SliceScore> scores{{"A/0", "A", Modality::CT, 1.0},
                                 {"A/1", "A", Modality::CT, 0.5},
                                 {"B/0", "B", Modality::MrT2, 0.25}};
  const EvalReport r = build_report("m", scores);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].modality, Modality::CT);
  EXPECT_EQ(r.rows[0].n, 2);
  EXPECT_DOUBLE_EQ(r.rows[0].mean, 0.75);
  ASSERT_EQ(r.per_patient.size(), 2u);
  EXPECT_EQ(r.per_patient[0].patient, "A");
  EXPECT_EQ(r.per_patient[0].n, 2);
  const std::string md = format_report_markdown(r);
  EXPECT_NE(md.find("| m | CT | 2 | 0.75±0.25 |"), std::string::npos);
}

TEST(Report, MetricsCsvRoundTrip) {
  const fs::path dir = temp_dir("metrics");
  std::vector<SliceScore> scores{{"A/0", "A", Modality::CT, 0.9}, {"B/3", "B", Modality::CT, 0.7}};
  const EvalReport r = build_report("X", scores);
  write_metrics_csv(r, dir / "metrics.csv");
  const EvalReport back = read_metrics_csv(dir / "metrics.csv");
  ASSERT_EQ(back.per_slice.size(), 2u);
  EXPECT_EQ(back.per_slice[1].slice_id, "B/3");
  EXPECT_NEAR(back.rows[0].mean, 0.8, 1e-12);
  EXPECT_NEAR(back.rows[0].std, 0.1, 1e-12);
}

TEST(Evaluate, MissingPredictionCountsAsEmpty) {
  const fs::path dir = temp_dir("evaluate");
  Manifest m;
  ManifestRecord rec;
  rec.patient = "P9";
  rec.index = 0;
  rec.image = "slices/P9/0.png";
  rec.mask = "masks/P9/0.png";
  png::write_gray16(dir / rec.image, Image(6, 6, 0.2f));
  png::write_mask(dir / rec.mask, square(6, 6, 1, 1, 3));
  m.records.push_back(rec);
  m.write(dir / "slices.txt");
  fs::create_directories(dir / "preds");
  const EvalReport r = evaluate(dir / "preds", dir / "slices.txt");
  ASSERT_EQ(r.per_slice.size(), 1u);
  EXPECT_EQ(r.per_slice[0].dice, 0.0);
}

TEST(Compare, DeltaAndMarkdown) {
  std::vector<SliceScore> a{{"A/0", "A", Modality::CT, 0.8}, {"A/1", "A", Modality::CT, 0.6}};
  std::vector<SliceScore> b{{"A/0", "A", Modality::CT, 0.9}, {"A/1", "A", Modality::CT, 0.9}};
  const Comparison c = compare(build_report("Mask R-CNN", a), build_report("HED-Mask R-CNN", b));
  ASSERT_EQ(c.rows.size(), 1u);
  EXPECT_NEAR(c.rows[0].delta, 0.2, 1e-12);
  const std::string md = format_comparison_markdown(c);
  EXPECT_NE(md.find("0.70±0.10"), std::string::npos);
  EXPECT_NE(md.find("0.90±0.00"), std::string::npos);
  std::vector<SliceScore> other{{"Z/0", "Z", Modality::CT, 0.9}};
  EXPECT_THROW(compare(build_report("a", a), build_report("b", other)), Error);
}

TEST(Overlay, ContourColorsAndLegend) {
  const Mask gt = square(10, 10, 2, 2, 5);
  const Mask pred = square(10, 10, 2, 2, 4);
  const png::Rgb8 img = render_overlay(Image(10, 10, 0.5f), pred, gt);
  EXPECT_EQ(img.px(2, 2)[0], kBothColor[0]);
  EXPECT_EQ(img.px(2, 2)[1], kBothColor[1]);
  EXPECT_EQ(img.px(6, 6)[1], kGtColor[1]);
  EXPECT_EQ(img.px(6, 6)[0], kGtColor[0]);
  EXPECT_EQ(img.px(5, 5)[0], kPredColor[0]);
  EXPECT_EQ(img.px(5, 5)[1], kPredColor[1]);
  EXPECT_EQ(img.px(0, 0)[0], 128);
  const fs::path dir = temp_dir("overlay");
  overlay(Image(10, 10, 0.5f), pred, gt, dir / "o.png");
  EXPECT_FALSE(png::read_text_chunks(dir / "o.png").empty());
}
