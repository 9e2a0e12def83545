#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpo/schedule.hpp"

namespace tpo {

// Fixed 24-token vocabulary: 4 colors, 4 shapes, patch names, template
// words, yes/no, and the specials.
namespace vocab {
inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kPad = 2;
inline constexpr int kColorBase = 3;   // red green blue yellow
inline constexpr int kShapeBase = 7;   // circle square triangle star
inline constexpr int kPatchBase = 11;  // p0 p1 p2 p3
inline constexpr int kDescribe = 15;
inline constexpr int kPatchWord = 16;
inline constexpr int kIs = 17;
inline constexpr int kThere = 18;
inline constexpr int kHas = 19;
inline constexpr int kYes = 20;
inline constexpr int kNo = 21;
inline constexpr int kA = 22;
inline constexpr int kPeriod = 23;
inline constexpr int kSize = 24;

const std::vector<std::string>& token_strings();
std::string token_to_string(int id);
int token_from_string(const std::string& s);
bool is_color(int id);
bool is_shape(int id);
bool is_yes_no(int id);
// Attribute-bearing tokens: colors, shapes, yes/no.
bool is_attribute(int id);
}  // namespace vocab

inline constexpr int kColorCount = 4;
inline constexpr int kShapeCount = 4;
inline constexpr int kPatchCount = 4;
inline constexpr int kFeatureDim = 12;  // color one-hot + shape one-hot + position one-hot

struct SceneObject {
  int color = 0;  // 0..3
  int shape = 0;  // 0..3
  bool operator==(const SceneObject&) const = default;
};

struct Scene {
  std::vector<SceneObject> objects;     // size kPatchCount
  std::vector<double> patch_features;   // kPatchCount x kFeatureDim, row-major
  std::uint64_t scene_seed = 0;
  bool operator==(const Scene&) const = default;
};

Scene sample_scene(std::uint64_t seed);

enum class PromptKind { kDescription, kExistence };

struct PreferencePair {
  std::string pair_id;
  Scene scene;
  std::vector<int> prompt;
  std::vector<int> chosen;    // y_w
  std::vector<int> rejected;  // y_l
  std::vector<bool> anchor_tags_w;
  std::vector<bool> anchor_tags_l;
  CorruptionSpec corruption;

  PromptKind prompt_kind() const;
  // Description prompts query a single patch.
  int queried_patch() const;

  bool operator==(const PreferencePair&) const = default;
};

struct DatagenOptions {
  int corruption_step = 500;
  CorruptionMode corruption_mode = CorruptionMode::kDiffusion;
  // Mix of the two prompt templates. The default dataset is all
  // descriptions: their rejected responses keep five of six tokens factual,
  // which is what lets the lose-side calibration curve behave like the
  // mostly-factual rejected responses the method targets. Existence pairs
  // remain fully supported for mixed datasets.
  double description_fraction = 1.0;
  // Among description rejections: fraction corrupting both attributes.
  double both_wrong_fraction = 0.0;
};

PreferencePair render_pair(const Scene& scene, std::uint64_t master_seed, std::uint64_t pair_index,
                           const DatagenOptions& options);

// Dataset generation is a pure function of (count, master seed, options);
// pair k is independent of all others.
std::vector<PreferencePair> generate_dataset(std::size_t count, std::uint64_t master_seed,
                                             const DatagenOptions& options,
                                             std::size_t index_offset = 0);

// JSONL persistence, one pair per line, schema_version 1. Reading rejects
// unknown fields and malformed lines with the line number.
void write_dataset(const std::vector<PreferencePair>& pairs, const std::string& path);
std::vector<PreferencePair> read_dataset(const std::string& path);

void write_vocab_file(const std::string& path);

}  // namespace tpo
