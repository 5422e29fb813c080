#pragma once

#include "mimic/retarget/motion.hpp"

namespace mimic::retarget {

struct ContactParams {
  double height_threshold{0.05};  // m
  double speed_threshold{0.2};    // m/s
  int debounce_window{3};         // majority filter width, frames
};

// Per-frame foot contact from height/speed thresholds on the human foot joints
// ("l_ankle"/"r_ankle"). Heights are measured from the clip's ground plane
// (minimum foot height over the clip).
ContactSchedule extract_contacts(const HumanMotion& human, const ContactParams& params = {});

}  // namespace mimic::retarget
