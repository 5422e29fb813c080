#include "mimic/retarget/contacts.hpp"

namespace mimic::retarget {

ContactSchedule extract_contacts(const HumanMotion& human, const ContactParams& params) {
  if (params.height_threshold <= 0.0 || params.speed_threshold <= 0.0)
    throw rbd::ModelError("contact thresholds must be > 0");
  const int lf = human.joint_index("l_ankle");
  const int rf = human.joint_index("r_ankle");
  if (lf < 0 || rf < 0) throw rbd::ModelError("skeleton is missing foot joints (l_ankle/r_ankle)");
  const int tn = human.frames();

  // ground plane = minimum foot height over the clip
  double ground = std::numeric_limits<double>::max();
  for (const auto& p : human.positions) ground = std::min({ground, p(lf, 2), p(rf, 2)});

  ContactSchedule out;
  out.frame_rate = human.frame_rate;
  out.contact.resize(tn);
  const std::array<int, 2> feet{lf, rf};
  for (int f = 0; f < 2; ++f) {
    std::vector<bool> raw(tn);
    for (int t = 0; t < tn; ++t) {
      const double h = human.positions[t](feet[f], 2) - ground;
      const int t0 = std::max(0, t - 1);
      const int t1 = std::min(tn - 1, t + 1);
      const double speed = (human.positions[t1].row(feet[f]) - human.positions[t0].row(feet[f]))
                               .norm() *
                           human.frame_rate / (t1 - t0);
      raw[t] = h < params.height_threshold && speed < params.speed_threshold;
    }
    // majority filter to suppress chatter
    const int w = std::max(1, params.debounce_window);
    for (int t = 0; t < tn; ++t) {
      int votes = 0, total = 0;
      for (int k = t - w / 2; k <= t + w / 2; ++k) {
        if (k < 0 || k >= tn) continue;
        ++total;
        votes += raw[k] ? 1 : 0;
      }
      out.contact[t][f] = 2 * votes > total;
    }
  }
  out.rebuild_phases();
  return out;
}

}  // namespace mimic::retarget
