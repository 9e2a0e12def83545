#include "tpo/datagen.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tpo/rng.hpp"

namespace tpo {

namespace vocab {

const std::vector<std::string>& token_strings() {
  static const std::vector<std::string> kTokens = {
      "<bos>", "<eos>", "<pad>", "red",  "green",    "blue",  "yellow", "circle",
      "square", "triangle", "star", "p0", "p1",      "p2",    "p3",     "describe",
      "patch",  "is",       "there", "has", "yes",   "no",    "a",      "."};
  return kTokens;
}

std::string token_to_string(int id) {
  const auto& t = token_strings();
  if (id < 0 || id >= static_cast<int>(t.size())) {
    throw std::invalid_argument("token id " + std::to_string(id) + " out of range");
  }
  return t[id];
}

int token_from_string(const std::string& s) {
  const auto& t = token_strings();
  for (int i = 0; i < static_cast<int>(t.size()); ++i) {
    if (t[i] == s) return i;
  }
  throw std::invalid_argument("unknown token: " + s);
}

bool is_color(int id) { return id >= kColorBase && id < kColorBase + kColorCount; }
bool is_shape(int id) { return id >= kShapeBase && id < kShapeBase + kShapeCount; }
bool is_yes_no(int id) { return id == kYes || id == kNo; }
bool is_attribute(int id) { return is_color(id) || is_shape(id) || is_yes_no(id); }

}  // namespace vocab

Scene sample_scene(std::uint64_t seed) {
  Rng rng(seed);
  Scene scene;
  scene.scene_seed = seed;
  scene.objects.resize(kPatchCount);
  for (auto& obj : scene.objects) {
    obj.color = static_cast<int>(rng.below(kColorCount));
    obj.shape = static_cast<int>(rng.below(kShapeCount));
  }
  scene.patch_features.assign(kPatchCount * kFeatureDim, 0.0);
  for (int p = 0; p < kPatchCount; ++p) {
    double* row = scene.patch_features.data() + p * kFeatureDim;
    row[scene.objects[p].color] = 1.0;
    row[kColorCount + scene.objects[p].shape] = 1.0;
    row[kColorCount + kShapeCount + p] = 1.0;
  }
  for (double& v : scene.patch_features) v += 0.05 * rng.gaussian();
  return scene;
}

PromptKind PreferencePair::prompt_kind() const {
  if (prompt.size() > 1 && prompt[1] == vocab::kDescribe) return PromptKind::kDescription;
  return PromptKind::kExistence;
}

int PreferencePair::queried_patch() const {
  if (prompt_kind() != PromptKind::kDescription) {
    throw std::logic_error("queried_patch is defined for description prompts only");
  }
  return prompt.back() - vocab::kPatchBase;
}

namespace {

int other_value(Rng& rng, int current, int count) {
  int v = static_cast<int>(rng.below(count - 1));
  if (v >= current) ++v;
  return v;
}

std::vector<bool> attribute_tags(const std::vector<int>& tokens) {
  std::vector<bool> tags(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) tags[i] = vocab::is_attribute(tokens[i]);
  return tags;
}

}  // namespace

PreferencePair render_pair(const Scene& scene, std::uint64_t master_seed,
                           std::uint64_t pair_index, const DatagenOptions& options) {
  PreferencePair pair;
  {
    std::ostringstream id;
    id << "pair-";
    id.width(6);
    id.fill('0');
    id << pair_index;
    pair.pair_id = id.str();
  }
  pair.scene = scene;
  Rng rng(mix_seed(master_seed, pair_index * 2 + 1));

  const bool description = rng.uniform() < options.description_fraction;
  if (description) {
    const int p = static_cast<int>(rng.below(kPatchCount));
    const SceneObject& obj = scene.objects[p];
    const int color_tok = vocab::kColorBase + obj.color;
    const int shape_tok = vocab::kShapeBase + obj.shape;
    pair.prompt = {vocab::kBos, vocab::kDescribe, vocab::kPatchWord, vocab::kPatchBase + p};
    pair.chosen = {vocab::kPatchWord, vocab::kPatchBase + p, vocab::kHas,
                   color_tok,         shape_tok,             vocab::kEos};
    bool wrong_color, wrong_shape;
    if (rng.uniform() < options.both_wrong_fraction) {
      wrong_color = wrong_shape = true;
    } else {
      wrong_color = rng.uniform() < 0.5;
      wrong_shape = !wrong_color;
    }
    const int bad_color =
        wrong_color ? vocab::kColorBase + other_value(rng, obj.color, kColorCount) : color_tok;
    const int bad_shape =
        wrong_shape ? vocab::kShapeBase + other_value(rng, obj.shape, kShapeCount) : shape_tok;
    pair.rejected = {vocab::kPatchWord, vocab::kPatchBase + p, vocab::kHas,
                     bad_color,         bad_shape,             vocab::kEos};
  } else {
    int q_color, q_shape;
    if (rng.uniform() < 0.5) {
      const int p = static_cast<int>(rng.below(kPatchCount));
      q_color = scene.objects[p].color;
      q_shape = scene.objects[p].shape;
    } else {
      q_color = static_cast<int>(rng.below(kColorCount));
      q_shape = static_cast<int>(rng.below(kShapeCount));
    }
    bool present = false;
    for (const auto& obj : scene.objects) {
      if (obj.color == q_color && obj.shape == q_shape) present = true;
    }
    pair.prompt = {vocab::kBos,  vocab::kIs,
                   vocab::kThere, vocab::kA,
                   vocab::kColorBase + q_color, vocab::kShapeBase + q_shape};
    pair.chosen = {present ? vocab::kYes : vocab::kNo, vocab::kEos};
    pair.rejected = {present ? vocab::kNo : vocab::kYes, vocab::kEos};
  }
  pair.anchor_tags_w = attribute_tags(pair.chosen);
  pair.anchor_tags_l = attribute_tags(pair.rejected);
  pair.corruption.mode = options.corruption_mode;
  pair.corruption.step = options.corruption_step;
  pair.corruption.noise_seed = mix_seed(master_seed, hash_string(pair.pair_id));
  return pair;
}

std::vector<PreferencePair> generate_dataset(std::size_t count, std::uint64_t master_seed,
                                             const DatagenOptions& options,
                                             std::size_t index_offset) {
  std::vector<PreferencePair> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t index = index_offset + i;
    Scene scene = sample_scene(mix_seed(master_seed, index * 2));
    pairs.push_back(render_pair(scene, master_seed, index, options));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// JSONL persistence

namespace {

constexpr int kSchemaVersion = 1;

nlohmann::json pair_to_json(const PreferencePair& p) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : p.scene.objects) {
    objs.push_back({{"color", vocab::token_to_string(vocab::kColorBase + o.color)},
                    {"shape", vocab::token_to_string(vocab::kShapeBase + o.shape)}});
  }
  return nlohmann::json{
      {"schema_version", kSchemaVersion},
      {"pair_id", p.pair_id},
      {"scene", {{"objects", objs}, {"scene_seed", p.scene.scene_seed}}},
      {"prompt", p.prompt},
      {"chosen", p.chosen},
      {"rejected", p.rejected},
      {"anchor_tags_w", p.anchor_tags_w},
      {"anchor_tags_l", p.anchor_tags_l},
      {"corruption",
       {{"mode", to_string(p.corruption.mode)},
        {"step", p.corruption.step},
        {"noise_seed", p.corruption.noise_seed}}}};
}

void expect_fields(const nlohmann::json& j, const std::set<std::string>& allowed,
                   std::size_t line_no, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": unknown field '" +
                               it.key() + "' in " + where);
    }
  }
}

PreferencePair pair_from_json(const nlohmann::json& j, std::size_t line_no) {
  expect_fields(j,
                {"schema_version", "pair_id", "scene", "prompt", "chosen", "rejected",
                 "anchor_tags_w", "anchor_tags_l", "corruption"},
                line_no, "pair record");
  if (j.at("schema_version").get<int>() != kSchemaVersion) {
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": unsupported schema_version");
  }
  PreferencePair p;
  p.pair_id = j.at("pair_id").get<std::string>();
  const auto& js = j.at("scene");
  expect_fields(js, {"objects", "scene_seed"}, line_no, "scene");
  p.scene = sample_scene(js.at("scene_seed").get<std::uint64_t>());
  const auto& objs = js.at("objects");
  if (objs.size() != p.scene.objects.size()) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": field 'objects' has " +
                             std::to_string(objs.size()) + " entries");
  }
  for (std::size_t i = 0; i < objs.size(); ++i) {
    expect_fields(objs[i], {"color", "shape"}, line_no, "scene object");
    SceneObject o;
    o.color = vocab::token_from_string(objs[i].at("color").get<std::string>()) - vocab::kColorBase;
    o.shape = vocab::token_from_string(objs[i].at("shape").get<std::string>()) - vocab::kShapeBase;
    if (o != p.scene.objects[i]) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": scene objects disagree with scene_seed");
    }
  }
  p.prompt = j.at("prompt").get<std::vector<int>>();
  p.chosen = j.at("chosen").get<std::vector<int>>();
  p.rejected = j.at("rejected").get<std::vector<int>>();
  p.anchor_tags_w = j.at("anchor_tags_w").get<std::vector<bool>>();
  p.anchor_tags_l = j.at("anchor_tags_l").get<std::vector<bool>>();
  const auto& jc = j.at("corruption");
  expect_fields(jc, {"mode", "step", "noise_seed"}, line_no, "corruption");
  p.corruption.mode = corruption_mode_from_string(jc.at("mode").get<std::string>());
  p.corruption.step = jc.at("step").get<int>();
  p.corruption.noise_seed = jc.at("noise_seed").get<std::uint64_t>();
  if (p.anchor_tags_w.size() != p.chosen.size() || p.anchor_tags_l.size() != p.rejected.size()) {
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": field 'anchor_tags' length mismatch");
  }
  return p;
}

}  // namespace

void write_dataset(const std::vector<PreferencePair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& p : pairs) out << pair_to_json(p).dump() << '\n';
}

std::vector<PreferencePair> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<PreferencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": malformed JSON record");
    }
    try {
      pairs.push_back(pair_from_json(j, line_no));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

void write_vocab_file(const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["tokens"] = vocab::token_strings();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace tpo
