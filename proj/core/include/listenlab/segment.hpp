#pragma once

#include <utility>
#include <vector>

namespace listenlab {

// Cut a duration into 5-second clips; a tail shorter than the clip length is
// merged into the preceding segment. A duration below one clip length yields
// a single whole clip. The result covers [0, duration] exactly, contiguous
// and non-overlapping.
std::vector<std::pair<double, double>> segment_clips(double duration_s, double clip_len_s = 5.0);

}  // namespace listenlab
