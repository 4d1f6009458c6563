#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rtdlab/error.hpp"
#include "rtdlab/io.hpp"
#include "synthetic.hpp"

using namespace rtdlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "rtdlab_test_io";
  fs::create_directories(dir);
  return dir / name;
}

// Serialize to text and parse back, as a file round trip would.
io::json through_text(const io::json& j) { return io::json::parse(j.dump()); }

}  // namespace

TEST_CASE("documents carry schema version and kind") {
  const auto path = scratch("doc.json");
  io::write_document(path, io::document("sample", {{"x", 1}}));
  const auto j = io::read_document(path, "sample");
  CHECK(j["schema_version"] == 1);
  CHECK(j["x"] == 1);
  CHECK_THROWS_AS((void)io::read_document(path, "fit"), DataError);

  io::json wrong = j;
  wrong["schema_version"] = 2;
  io::write_atomic(path, wrong.dump());
  CHECK_THROWS_AS((void)io::read_document(path, "sample"), DataError);
  io::write_atomic(path, "{not json");
  CHECK_THROWS_AS((void)io::read_document(path, "sample"), DataError);
  CHECK_THROWS_AS((void)io::read_document(scratch("missing.json"), "sample"), DataError);
}

TEST_CASE("atomic writes leave no temporary file") {
  const auto path = scratch("nested/dir/out.txt");
  io::write_atomic(path, "hello");
  CHECK(io::read_text(path) == "hello");
  for (const auto& e : fs::directory_iterator(path.parent_path())) CHECK(e.path().filename() == "out.txt");
}

TEST_CASE("non-finite numbers") {
  CHECK(io::number(std::numeric_limits<double>::infinity()).is_null());
  CHECK(std::isinf(io::number_from(io::json(nullptr))));
  CHECK(io::number_from(io::json(2.5)) == 2.5);
}

TEST_CASE("sample and fit round trips") {
  const auto s = synthetic::draw_sample(dist::Family::Weibull, {0.8, 500.0, 20.0}, 60, 3);
  CHECK(io::sample_from_json(through_text(io::to_json(s))) == s);
  const auto sel = rtd::fit_all(s);
  const auto back = io::selection_from_json(through_text(io::to_json(sel)));
  CHECK(back.winner == sel.winner);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.fits[i].family == sel.fits[i].family);
    CHECK(back.fits[i].params == sel.fits[i].params);
    CHECK(back.fits[i].p_value == sel.fits[i].p_value);
    CHECK(back.fits[i].ks_stat == sel.fits[i].ks_stat);
  }
  const auto fit_json = io::to_json(sel.fits[0]);
  for (const char* key : {"family", "shape", "scale", "location", "ks_stat", "p_value", "log_likelihood"}) {
    CHECK(fit_json.contains(key));
  }
  io::json unsorted = io::to_json(s);
  unsorted["flips"] = {5, 3};
  CHECK_THROWS_AS((void)io::sample_from_json(unsorted), DataError);
}

TEST_CASE("recommendation round trip") {
  dist::RestartRecommendation r;
  r.unrestarted_mean = 1234.5;
  CHECK_FALSE(io::recommendation_from_json(through_text(io::to_json(r))).restarts());
  r.restart_at = dist::RestartAt{77.25, 900.0};
  const auto back = io::recommendation_from_json(through_text(io::to_json(r)));
  REQUIRE(back.restarts());
  CHECK(back.restart_at->t == 77.25);
  CHECK(back.unrestarted_mean == 1234.5);
}

TEST_CASE("feature vectors are keyed by name") {
  features::FeatureVector v;
  for (std::size_t i = 0; i < features::kNumFeatures; ++i) v.values[i] = 0.5 * static_cast<double>(i);
  const auto j = io::to_json(v);
  CHECK(j.contains("VCG-CLAUSE-mean"));
  CHECK(j.contains("saps_FirstLocalMinStep_Q.90"));
  CHECK(io::features_from_json(through_text(j)) == v);
  auto missing = j;
  missing.erase("VG-max");
  CHECK_THROWS_AS((void)io::features_from_json(missing), DataError);
}

TEST_CASE("model bundle round trip preserves predictions") {
  const auto corpus = synthetic::corpus(30, 8);
  auto opts = synthetic::quick_options();
  opts.train.max_epochs = 20;
  const auto m = pipeline::train_pipeline(corpus, opts, 4);
  const auto path = scratch("model.json");
  io::write_document(path, io::document("model", io::to_json(m)));
  const auto back = io::pipeline_from_json(io::read_document(path, "model"));
  CHECK(back.selected == m.selected);
  CHECK(back.forest.trees == m.forest.trees);
  for (const auto& inst : corpus) {
    const auto a = pipeline::pipeline_predict(m, inst.features);
    const auto b = pipeline::pipeline_predict(back, inst.features);
    CHECK(a.family == b.family);
    CHECK(a.params == b.params);
    CHECK(a.recommendation.restarts() == b.recommendation.restarts());
  }
  auto broken = io::to_json(m);
  broken["selected_features"][0] = "bogus";
  CHECK_THROWS_AS((void)io::pipeline_from_json(broken), DataError);

  const auto pred = pipeline::pipeline_predict(m, corpus[0].features);
  const auto pj = io::to_json(pred);
  CHECK(pj.contains("policy"));
  const auto pb = io::prediction_from_json(through_text(pj));
  CHECK(pb.params == pred.params);
}
