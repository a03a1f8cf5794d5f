#pragma once

#include "geometry.hpp"

#include <numbers>
#include <span>
#include <vector>

namespace linteg {

struct MatchThresholds {
  double mean_distance_max = 10.0;  // px
  double angle_max = 5.0 * std::numbers::pi / 180.0;
  double overlap_min = 0.5;
  int sample_count = 10;
  // Projections shorter than this (px) are not matched.
  double min_projected_length = 5.0;

  void validate() const;
};

// A matched (3D map line, detected 2D line) pair. map_segment holds the part
// of the map line that was in view when the pair was formed; its endpoints
// are the two observations contributed to the estimator.
struct Correspondence {
  int map_line_id = 0;
  int detection_index = -1;
  Line2D detected_line;
  Line2D projected_line;
  LineSegment3D map_segment;
  double mean_distance = 0.0;
  double angle = 0.0;
  double overlap = 0.0;
};

// Sum of |distance to target| over n evenly spaced points on the source
// segment, endpoints included.
double sampled_distance(const Line2D& source, const Line2D& target, int n);

// Acute angle between the two line directions, in [0, pi/2].
double angle_between(const Line2D& l1, const Line2D& l2);

// Fraction of the projected segment covered by the detected segment's
// orthogonal projection onto it.
double overlap_ratio(const Line2D& projected, const Line2D& detected);

// Projects the map at the initial pose and greedily pairs map lines with
// detections by ascending mean distance. The result is a partial injection
// in both directions, ordered by map line input order.
std::vector<Correspondence> match_lines(std::span<const LineSegment3D> map_lines,
                                        std::span<const Line2D> detected,
                                        const Pose& pose_wc,
                                        const CameraIntrinsics& k,
                                        const MatchThresholds& th);

// Projected, view-clipped map line; empty when culled or shorter than
// min_length pixels.
std::optional<std::pair<LineSegment3D, Line2D>> project_map_line(
    const LineSegment3D& segment, const Pose& pose_wc,
    const CameraIntrinsics& k, double min_length);

}  // namespace linteg
