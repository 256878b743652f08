#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lesionmetrics/io.hpp"
#include "lesionmetrics/phantom.hpp"
#include "lesionmetrics/pipeline.hpp"

namespace lm = lesionmetrics;
namespace fs = std::filesystem;

namespace {

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "lesionmetrics_test_pipeline";
  fs::create_directories(dir);
  return dir;
}

// gt with one PT and one LN lesion; pred identical, or missing the LN lesion.
void write_case(const fs::path& dir, bool with_ln) {
  lm::PhantomSpec spec;
  spec.dims = {12, 12, 12};
  spec.lesions = {{{4, 4, 4}, 2.0, 1, true}, {{8, 8, 8}, 1.0, 2, with_ln}};
  const auto ph = lm::generate(spec);
  fs::create_directories(dir);
  lm::save_volume(dir / "gt.json", ph.ground_truth);
  lm::save_volume(dir / "pred.json", ph.prediction);
}

std::string csv_of(const lm::EvaluationOutput& out) {
  std::ostringstream s;
  lm::write_metrics_csv(s, out);
  return s.str();
}

lm::MetricsTable table(std::vector<std::pair<std::string, double>> dice_by_case) {
  lm::MetricsTable t;
  for (const auto& [id, dice] : dice_by_case) {
    lm::ClassMetrics m;
    m.label = 2;
    m.dice = dice;
    t.cases.push_back({id, "cfg", 0, 0, {m}});
  }
  return t;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(lm::format_number(0.5) == "0.5");
  CHECK(lm::format_number(1.0 / 3.0) == "0.333333");
  CHECK(lm::format_number(123456789.0) == "1.23457e+08");
  CHECK(lm::format_number(std::nan("")) == "NaN");
  CHECK(lm::format_number(INFINITY) == "inf");
  CHECK(lm::format_number(-INFINITY) == "-inf");
  CHECK(std::isnan(lm::parse_number("NaN")));
  CHECK(std::isinf(lm::parse_number("inf")));
  CHECK(lm::parse_number("0.25") == 0.25);
  CHECK_THROWS_AS(lm::parse_number("0.25x"), lm::FormatError);
  CHECK(lm::class_name(1) == "PT");
  CHECK(lm::class_name(2) == "LN");
}

TEST_CASE("manifest parsing") {
  std::istringstream ok("case_id,gt,pred,fold,repeat,config\n# comment\nc1,a/gt.json,/abs/p.json,2,1,sel\n");
  const auto m = lm::CaseManifest::parse(ok, "/data");
  REQUIRE(m.rows.size() == 1);
  CHECK(m.rows[0].gt == fs::path("/data/a/gt.json"));
  CHECK(m.rows[0].pred == fs::path("/abs/p.json"));
  CHECK(m.rows[0].fold == 2);
  CHECK(m.rows[0].repeat == 1);
  CHECK(m.rows[0].config == "sel");

  std::istringstream bad_header("id,gt,pred,fold,repeat,config\n");
  CHECK_THROWS_AS(lm::CaseManifest::parse(bad_header), lm::ValidationError);
  std::istringstream dup("case_id,gt,pred,fold,repeat,config\nc,a,b,0,0,x\nc,a,b,0,0,x\n");
  CHECK_THROWS_AS(lm::CaseManifest::parse(dup), lm::ValidationError);
  std::istringstream short_row("case_id,gt,pred,fold,repeat,config\nc,a,b,0\n");
  CHECK_THROWS_AS(lm::CaseManifest::parse(short_row), lm::ValidationError);
  std::istringstream bad_fold("case_id,gt,pred,fold,repeat,config\nc,a,b,x,0,y\n");
  CHECK_THROWS_AS(lm::CaseManifest::parse(bad_fold), lm::ValidationError);
}

TEST_CASE("evaluate, CSV round trip and error rows") {
  const auto dir = workdir() / "eval";
  write_case(dir / "full", true);
  write_case(dir / "miss", false);
  std::istringstream text(
      "case_id,gt,pred,fold,repeat,config\n"
      "b,miss/gt.json,miss/pred.json,1,0,X\n"
      "a,full/gt.json,full/pred.json,0,0,X\n"
      "c,nowhere/gt.json,full/pred.json,0,0,X\n");
  const auto manifest = lm::CaseManifest::parse(text, dir);
  lm::EvaluateOptions opts;
  opts.keep_match_tables = true;
  const auto out = lm::evaluate(manifest, opts);
  REQUIRE(out.cases.size() == 2);
  REQUIRE(out.errors.size() == 1);
  CHECK(out.cases[0].case_id == "a");
  CHECK(out.errors[0].case_id == "c");
  CHECK(out.match_tables.size() == 4);

  const auto& full_ln = out.cases[0].classes[1];
  CHECK(full_ln.dice == 1.0);
  CHECK(full_ln.sds == 1.0);
  CHECK(full_ln.msd == 0.0);
  CHECK(full_ln.hd95 == 0.0);
  CHECK(full_ln.sensitivity == 1.0);
  CHECK(full_ln.precision == 1.0);
  const auto& miss_ln = out.cases[1].classes[1];
  CHECK(miss_ln.sensitivity == 0.0);
  CHECK(std::isnan(miss_ln.precision));
  CHECK(std::isinf(miss_ln.hd95));

  const auto csv = csv_of(out);
  CHECK(csv.rfind("# lesionmetrics-v1\n", 0) == 0);
  CHECK(csv.find("c,X,0,0,,") != std::string::npos);
  CHECK(csv.find(",error: ") != std::string::npos);
  std::istringstream back(csv);
  const auto t = lm::read_metrics_csv(back);
  REQUIRE(t.cases.size() == 2);
  CHECK(t.cases[1].classes[1].hd95 == miss_ln.hd95);
  CHECK(std::isnan(t.cases[1].classes[1].precision));
  CHECK(t.cases[0].classes[0].adaptive_dice == doctest::Approx(out.cases[0].classes[0].adaptive_dice).epsilon(1e-5));

  opts.jobs = 3;
  CHECK(csv_of(lm::evaluate(manifest, opts)) == csv);
  CHECK(lm::metrics_json(lm::evaluate(manifest, opts)).dump() == lm::metrics_json(out).dump());
  const auto j = lm::metrics_json(out);
  CHECK(j.at("cases")[1].at("classes")[1].at("precision") == "NaN");

  opts.config = "Y";
  CHECK(lm::evaluate(manifest, opts).cases.empty());
}

TEST_CASE("dimension mismatch becomes an error row") {
  const auto dir = workdir() / "mismatch";
  fs::create_directories(dir);
  lm::save_volume(dir / "a.json", lm::LabelVolume({4, 4, 4}, {}, std::vector<std::int32_t>(64, 0)));
  lm::save_volume(dir / "b.json", lm::LabelVolume({4, 4, 5}, {}, std::vector<std::int32_t>(80, 0)));
  lm::save_volume(dir / "c.json", lm::LabelVolume({4, 4, 4}, {1, 1, 2}, std::vector<std::int32_t>(64, 0)));
  std::istringstream text("case_id,gt,pred,fold,repeat,config\nx,a.json,b.json,0,0,A\ny,a.json,c.json,0,0,A\n");
  const auto out = lm::evaluate(lm::CaseManifest::parse(text, dir), {});
  REQUIRE(out.errors.size() == 2);
  CHECK(out.errors[0].reason.find("dimension mismatch") != std::string::npos);
  CHECK(out.errors[1].reason.find("spacing mismatch") != std::string::npos);
}

TEST_CASE("150 cases by 3 repeats by 2 classes give 900 rows") {
  const auto dir = workdir() / "many";
  fs::create_directories(dir);
  std::vector<std::int32_t> v(27, 0);
  v[0] = 1;
  v[26] = 2;
  lm::save_volume(dir / "gt.json", lm::LabelVolume({3, 3, 3}, {}, v));
  std::ostringstream text;
  text << "case_id,gt,pred,fold,repeat,config\n";
  for (int c = 0; c < 150; ++c) {
    for (int r = 0; r < 3; ++r) text << "case" << c << ",gt.json,gt.json," << c % 5 << ',' << r << ",B\n";
  }
  std::istringstream in(text.str());
  const auto out = lm::evaluate(lm::CaseManifest::parse(in, dir), {});
  std::istringstream csv(csv_of(out));
  std::string line;
  std::size_t data_rows = 0;
  while (std::getline(csv, line)) data_rows += line.find(",ok") != std::string::npos;
  CHECK(data_rows == 900);
}

TEST_CASE("compare identical tables reports degenerate tests") {
  const auto t = table({{"a", 0.5}, {"b", 0.6}, {"c", 0.7}});
  const auto r = lm::compare(t, t, "base", "sel");
  CHECK(r.patients == 3);
  for (const auto& row : r.rows) {
    if (row.metric == "dice") {
      CHECK(row.mean_a == row.mean_b);
      CHECK(std::isnan(row.p_value));
      CHECK_FALSE(row.significant);
    }
  }
  const auto text = lm::render_text(r);
  CHECK(text.find("LN Dice 0.600 vs 0.600, p = —") != std::string::npos);
  CHECK(lm::to_json(r).at("rows")[0].at("p_value") == "—");
}

TEST_CASE("compare row format and significance flag") {
  std::vector<std::pair<std::string, double>> a, b;
  for (int i = 0; i < 8; ++i) {
    a.push_back({"p" + std::to_string(i), 0.5 + 0.01 * i});
    b.push_back({"p" + std::to_string(i), 0.6 + 0.012 * i});
  }
  const auto r = lm::compare(table(a), table(b));
  const auto& dice = r.rows.front();
  CHECK(dice.metric == "dice");
  CHECK(dice.p_value == doctest::Approx(2.0 / 256.0));
  CHECK(dice.significant);
  CHECK(lm::render_text(r).find("LN Dice 0.535 vs 0.642, p = 0.008 *") != std::string::npos);

  lm::ComparisonReport manual;
  manual.rows.push_back({2, "dice", 0.734, 0.758, 0.019, 20, true, true});
  CHECK(lm::render_text(manual).find("LN Dice 0.734 vs 0.758, p = 0.019") != std::string::npos);
}

TEST_CASE("compare rejects mismatched case sets and folds") {
  const auto a = table({{"a", 0.5}, {"b", 0.6}, {"c", 0.7}});
  const auto b = table({{"a", 0.5}, {"b", 0.6}, {"d", 0.7}});
  CHECK_THROWS_WITH_AS(lm::compare(a, b, "A", "B"), doctest::Contains("missing from B: c"),
                       lm::ValidationError);
  CHECK_THROWS_WITH_AS(lm::compare(a, b, "A", "B"), doctest::Contains("missing from A: d"),
                       lm::ValidationError);
  auto moved = a;
  moved.cases[0].fold = 3;
  CHECK_THROWS_AS(lm::compare(a, moved), lm::ValidationError);
  auto other_opts = a;
  other_opts.options.tolerance_mm = 2.0;
  CHECK_THROWS_AS(lm::compare(a, other_opts), lm::ValidationError);
}

TEST_CASE("empty structures yield NaN and are excluded from aggregation") {
  const auto dir = workdir() / "empty_ln";
  fs::create_directories(dir);
  std::vector<std::int32_t> v(64, 0);
  v[5] = 1;
  lm::save_volume(dir / "gt.json", lm::LabelVolume({4, 4, 4}, {}, v));
  std::istringstream text("case_id,gt,pred,fold,repeat,config\nx,gt.json,gt.json,0,0,A\n");
  const auto out = lm::evaluate(lm::CaseManifest::parse(text, dir), {});
  const auto& ln = out.cases.at(0).classes.at(1);
  CHECK(std::isnan(ln.dice));
  CHECK(std::isnan(ln.sds));
  CHECK(std::isnan(ln.hd95));
  const auto agg = lm::aggregate_runs(out.cases);
  CHECK(agg.series.at({2, "dice"}).n == 0);
  CHECK(agg.series.at({1, "dice"}).n == 1);
}
