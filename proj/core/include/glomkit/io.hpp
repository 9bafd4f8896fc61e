#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "glomkit/augment.hpp"
#include "glomkit/metrics.hpp"
#include "glomkit/pipeline.hpp"
#include "glomkit/synthgen.hpp"
#include "glomkit/uaan.hpp"
#include "glomkit/uncertainty.hpp"

namespace glom::io {

namespace fs = std::filesystem;

// All readers throw ValidationError on malformed input or missing files.

/// 8-bit binary PGM (P5). Masks: 255 where value >= 0.5. Images: round(255 v).
void write_pgm_mask(const fs::path& path, const PixelMap& mask);
void write_pgm_image(const fs::path& path, const PixelMap& image);
void write_ppm_image(const fs::path& path, const RgbImage& image);
/// Values scaled back to [0, 1].
PixelMap read_pgm(const fs::path& path);

/// Flat little-endian float64 values at `path` with a JSON sidecar
/// {"width", "height"} at `path` + ".json".
void write_probability_map(const fs::path& path, const PixelMap& map);
PixelMap read_probability_map(const fs::path& path);

std::string instances_to_json(const InstanceSet& instances);
std::string scene_to_json(const SceneSpec& spec, const SceneSample& sample);
SceneSpec scene_spec_from_json(const std::string& text);

std::string dataset_to_json(const ToyDataset& dataset);
ToyDataset dataset_from_json(const std::string& text);

std::string model_to_json(const ModelParams& params);
ModelParams model_from_json(const std::string& text);

std::string history_to_csv(std::span<const EpochStats> history);

std::string reconstitution_report_to_json(const ReconstitutionReport& report);

std::string eval_report_to_json(const EvalReport& report);
std::string confusion_to_csv(const Confusion& confusion);

/// JSON lines {scene_id, box:[x0,y0,x1,y1], cls, confidence}.
std::string records_to_jsonl(std::span<const DetectionRecord> records);
std::vector<DetectionRecord> records_from_jsonl(const std::string& text);
/// Same shape without confidence.
std::string ground_truth_to_jsonl(std::span<const GroundTruthBox> gts);
std::vector<GroundTruthBox> ground_truth_from_jsonl(const std::string& text);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace glom::io
