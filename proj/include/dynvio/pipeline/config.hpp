// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <string>

#include "dynvio/imu/imu.hpp"
#include "dynvio/map/tsdf_volume.hpp"
#include "dynvio/objects/object_model.hpp"
#include "dynvio/reloc/relocalise.hpp"
#include "dynvio/tracking/tracker.hpp"

namespace dynvio {

/// Every tunable of a run. Defaults are the documented values.
struct SessionConfig {
  TrackingParams tracking;
  ImuNoiseParams imu;  ///< g_W is not configurable
  InitialSigmas initial;
  VolumeParams background = VolumeParams::background();
  VolumeParams object = VolumeParams::object();
  RaycastParams raycast;
  ObjectParams objects;
  RelocParams reloc;
  int young_duplicate_frames = 5;  ///< models this young may still be merged by relocalisation
  std::uint64_t seed = 0;
};

/// INI text with sections [session] [tracking] [imu] [init] [map] [objects]
/// [reloc]. Unknown sections or keys, malformed values and out-of-range
/// values throw std::runtime_error naming the key.
SessionConfig parseConfig(const std::string& text);
SessionConfig loadConfig(const std::string& path);

/// INI text with every key at its current value.
std::string formatConfig(const SessionConfig& config);

}  // namespace dynvio
