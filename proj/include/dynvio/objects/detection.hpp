// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dynvio/core/image.hpp"

namespace dynvio {

/// One line of the class map sidecar: instance label -> class probabilities.
struct ClassMapEntry {
  int instance = 0;
  std::vector<std::pair<int, double>> probs;  ///< (class id, probability)
  int argmaxClass() const;                    ///< ties to the lowest class id; -1 if empty
};

/// Text format: `<instance> <class>:<prob> [<class>:<prob> ...]` per line,
/// '#' comments. Throws std::runtime_error.
std::vector<ClassMapEntry> readClassMap(const std::string& path);
void writeClassMap(const std::string& path, const std::vector<ClassMapEntry>& entries);

/// An instance mask in the current frame.
struct Detection {
  int label = 0;  ///< instance label in the mask image
  Mask mask;
  int size = 0;  ///< pixel count of mask
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  std::map<int, double> class_probs;
  int classId() const;  ///< argmax, ties to the lowest id; -1 if unknown
};

/// One detection per nonzero label, ordered by label. Labels missing from
/// the class map get an empty probability map.
std::vector<Detection> extractDetections(const ImageU16& labels,
                                         const std::vector<ClassMapEntry>& classes);

double maskIoU(const Mask& a, const Mask& b);

struct Association {
  std::vector<std::pair<int, int>> matches;  ///< (detection index, model id)
  std::vector<double> iou;                   ///< per match
  std::vector<int> unmatched;                ///< detection indices, ascending
};

/// Greedy one-to-one assignment in descending IoU among pairs with
/// IoU > threshold. `rendered` holds model ids (negative = none).
Association associate(const std::vector<Detection>& detections, const Image<int>& rendered,
                      const std::vector<int>& model_ids, double threshold = 0.8);

}  // namespace dynvio
