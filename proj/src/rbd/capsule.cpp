#include "mimic/rbd/capsule.hpp"

#include <algorithm>

namespace mimic::rbd {

// Closest points between segments, Ericson "Real-Time Collision Detection" 5.1.9.
SegmentWitness segment_segment_closest(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1,
                                       const Eigen::Vector3d& b0, const Eigen::Vector3d& b1) {
  const Eigen::Vector3d d1 = a1 - a0;
  const Eigen::Vector3d d2 = b1 - b0;
  const Eigen::Vector3d r = a0 - b0;
  const double aa = d1.squaredNorm();
  const double ee = d2.squaredNorm();
  const double ff = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double kEps = 1e-12;
  if (aa <= kEps && ee <= kEps) {
    // both segments degenerate to points
  } else if (aa <= kEps) {
    t = std::clamp(ff / ee, 0.0, 1.0);
  } else {
    const double cc = d1.dot(r);
    if (ee <= kEps) {
      s = std::clamp(-cc / aa, 0.0, 1.0);
    } else {
      const double bb = d1.dot(d2);
      const double denom = aa * ee - bb * bb;
      if (denom > kEps) s = std::clamp((bb * ff - cc * ee) / denom, 0.0, 1.0);
      t = (bb * s + ff) / ee;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-cc / aa, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((bb - cc) / aa, 0.0, 1.0);
      }
    }
  }
  SegmentWitness w;
  w.on_a = a0 + s * d1;
  w.on_b = b0 + t * d2;
  w.distance = (w.on_a - w.on_b).norm();
  return w;
}

namespace {

// lexicographic capsule ordering so the result is bit-exact symmetric
bool capsule_less(const Capsule& a, const Capsule& b) {
  for (int i = 0; i < 3; ++i) {
    if (a.p0[i] != b.p0[i]) return a.p0[i] < b.p0[i];
  }
  for (int i = 0; i < 3; ++i) {
    if (a.p1[i] != b.p1[i]) return a.p1[i] < b.p1[i];
  }
  return a.radius < b.radius;
}

}  // namespace

double capsule_distance(const Capsule& a, const Capsule& b, SegmentWitness* witness) {
  const bool flip = capsule_less(b, a);
  const Capsule& first = flip ? b : a;
  const Capsule& second = flip ? a : b;
  SegmentWitness w = segment_segment_closest(first.p0, first.p1, second.p0, second.p1);
  if (flip) std::swap(w.on_a, w.on_b);
  if (witness) *witness = w;
  return w.distance - (a.radius + b.radius);
}

Capsule transform_capsule(const Eigen::Matrix3d& rot, const Eigen::Vector3d& pos,
                          const Capsule& c) {
  Capsule out;
  out.p0 = rot * c.p0 + pos;
  out.p1 = rot * c.p1 + pos;
  out.radius = c.radius;
  return out;
}

}  // namespace mimic::rbd
