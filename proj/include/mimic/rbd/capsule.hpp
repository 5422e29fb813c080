#pragma once

#include <Eigen/Dense>

#include "mimic/rbd/model.hpp"

namespace mimic::rbd {

// Closest points between two segments [a0,a1] and [b0,b1].
struct SegmentWitness {
  Eigen::Vector3d on_a;
  Eigen::Vector3d on_b;
  double distance;
};

SegmentWitness segment_segment_closest(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1,
                                       const Eigen::Vector3d& b0, const Eigen::Vector3d& b1);

// Signed surface distance; negative while interpenetrating.
double capsule_distance(const Capsule& a, const Capsule& b, SegmentWitness* witness = nullptr);

Capsule transform_capsule(const Eigen::Matrix3d& rot, const Eigen::Vector3d& pos, const Capsule& c);

}  // namespace mimic::rbd
