#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "rtdlab/dist.hpp"
#include "rtdlab/eval.hpp"
#include "rtdlab/features.hpp"
#include "rtdlab/forest.hpp"
#include "rtdlab/mlp.hpp"
#include "rtdlab/pipeline.hpp"
#include "rtdlab/rtd.hpp"

namespace rtdlab::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
[[nodiscard]] std::string read_text(const std::filesystem::path& path);

// {"schema_version": 1, "kind": kind, ...body}
[[nodiscard]] json document(std::string_view kind, json body);
void write_document(const std::filesystem::path& path, const json& doc);
// Throws DataError on a missing file, bad JSON, a schema-version mismatch or
// a different kind.
[[nodiscard]] json read_document(const std::filesystem::path& path, std::string_view kind);

// Non-finite values are stored as null and read back as +inf.
[[nodiscard]] json number(double v);
[[nodiscard]] double number_from(const json& j);

[[nodiscard]] json to_json(const rtd::RtdSample& s);
[[nodiscard]] rtd::RtdSample sample_from_json(const json& j);

[[nodiscard]] json to_json(const dist::DistParams& p);
[[nodiscard]] dist::DistParams params_from_json(const json& j);

[[nodiscard]] json to_json(const dist::FitResult& f);
[[nodiscard]] dist::FitResult fit_from_json(const json& j);

[[nodiscard]] json to_json(const rtd::WinnerSelection& w);
[[nodiscard]] rtd::WinnerSelection selection_from_json(const json& j);

[[nodiscard]] json to_json(const dist::RestartRecommendation& r);
[[nodiscard]] dist::RestartRecommendation recommendation_from_json(const json& j);

[[nodiscard]] json to_json(const features::FeatureVector& v);
[[nodiscard]] features::FeatureVector features_from_json(const json& j);

[[nodiscard]] json to_json(const features::NormalizationSpec& s);
[[nodiscard]] features::NormalizationSpec normalization_from_json(const json& j);

[[nodiscard]] json to_json(const ml::ForestModel& m);
[[nodiscard]] ml::ForestModel forest_from_json(const json& j);

[[nodiscard]] json to_json(const ml::MlpModel& m);
[[nodiscard]] ml::MlpModel mlp_from_json(const json& j);

[[nodiscard]] json to_json(const pipeline::PipelineModel& m);
[[nodiscard]] pipeline::PipelineModel pipeline_from_json(const json& j);

[[nodiscard]] json to_json(const pipeline::PipelinePrediction& p);
[[nodiscard]] pipeline::PipelinePrediction prediction_from_json(const json& j);

[[nodiscard]] json to_json(const eval::H2HResult& r);
[[nodiscard]] json to_json(const eval::Comparison& c);
[[nodiscard]] json to_json(const eval::SubsetTable& t);

}  // namespace rtdlab::io
