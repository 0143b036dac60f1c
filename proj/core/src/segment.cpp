#include "listenlab/segment.hpp"

#include <cmath>
#include <string>

#include "listenlab/common.hpp"

namespace listenlab {

std::vector<std::pair<double, double>> segment_clips(double duration_s, double clip_len_s) {
  if (!(duration_s > 0.0))
    throw ValidationError("segment_clips: duration must be positive, got " +
                          std::to_string(duration_s));
  if (!(clip_len_s > 0.0)) throw ValidationError("segment_clips: clip length must be positive");

  auto n_full = static_cast<long long>(std::floor(duration_s / clip_len_s));
  std::vector<std::pair<double, double>> out;
  if (n_full <= 1) {
    out.emplace_back(0.0, duration_s);
    return out;
  }
  // Full clips except the last, which absorbs any sub-length tail.
  for (long long i = 0; i + 1 < n_full; ++i)
    out.emplace_back(static_cast<double>(i) * clip_len_s, static_cast<double>(i + 1) * clip_len_s);
  out.emplace_back(static_cast<double>(n_full - 1) * clip_len_s, duration_s);
  return out;
}

}  // namespace listenlab
