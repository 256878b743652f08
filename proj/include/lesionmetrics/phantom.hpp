#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lesionmetrics/volume.hpp"

namespace lesionmetrics {

struct PhantomLesion {
  std::array<std::int64_t, 3> center{};
  double radius_mm = 0.0;
  std::int32_t label = LabelVolume::kLymphNode;
  /// Whether the lesion appears in the generated prediction.
  bool predicted = true;
};

struct PhantomSpec {
  Dims dims{16, 16, 16};
  Spacing spacing{};
  std::vector<PhantomLesion> lesions;
  /// Probability that a surface voxel of a predicted lesion is flipped to 0.5.
  double noise = 0.0;
  std::uint64_t seed = 0;

  /// Throws RangeError for bad noise/labels/radii and for lesions not fitting the grid.
  void validate() const;
};

struct Phantom {
  LabelVolume ground_truth;
  /// Predicted lesions only, with flipped voxels set to background.
  LabelVolume prediction;
  /// Per class: 1 inside predicted lesions, 0.5 on flipped voxels, 0 elsewhere.
  std::map<std::int32_t, ProbVolume> probabilities;
  std::vector<std::string> warnings;
};

/// A voxel belongs to a lesion when its centre lies within radius_mm of the lesion centre.
/// Later lesions overwrite earlier ones. Output is a pure function of the spec.
Phantom generate(const PhantomSpec& spec);

/// {"dims":[..],"spacing":[..],"noise":p,"seed":n,
///  "lesions":[{"center":[i,j,k],"radius_mm":r,"label":l,"predicted":true}, ...]}
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PhantomSpec& spec);

}  // namespace lesionmetrics
