#include "matching.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace linteg {

void MatchThresholds::validate() const {
  if (!(mean_distance_max > 0.0) || !(angle_max > 0.0) ||
      !(overlap_min > 0.0) || overlap_min > 1.0 || sample_count < 2 ||
      min_projected_length < 0.0) {
    throw Error(ErrorCode::InvariantViolation,
                "match thresholds: need positive distance/angle, overlap in "
                "(0,1] and sample_count >= 2");
  }
}

double sampled_distance(const Line2D& source, const Line2D& target, int n) {
  if (n < 2) {
    throw Error(ErrorCode::InvalidArgument, "sample count must be >= 2");
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    const Vec2 q = source.p_start + t * (source.p_end - source.p_start);
    sum += std::abs(signed_distance(target, q));
  }
  return sum;
}

double angle_between(const Line2D& l1, const Line2D& l2) {
  const double c = std::abs(l1.direction().dot(l2.direction()));
  return std::acos(std::clamp(c, 0.0, 1.0));
}

double overlap_ratio(const Line2D& projected, const Line2D& detected) {
  const double length = projected.length();
  if (!(length > 0.0)) return 0.0;
  const Vec2 axis = (projected.p_end - projected.p_start) / length;
  const double s0 = (detected.p_start - projected.p_start).dot(axis);
  const double s1 = (detected.p_end - projected.p_start).dot(axis);
  const double lo = std::max(0.0, std::min(s0, s1));
  const double hi = std::min(length, std::max(s0, s1));
  return std::clamp((hi - lo) / length, 0.0, 1.0);
}

std::optional<std::pair<LineSegment3D, Line2D>> project_map_line(
    const LineSegment3D& segment, const Pose& pose_wc,
    const CameraIntrinsics& k, double min_length) {
  const auto clipped = clip_to_view(segment, pose_wc, k);
  if (!clipped) return std::nullopt;
  const Vec2 ps = project(pose_wc, k, clipped->p_start);
  const Vec2 pe = project(pose_wc, k, clipped->p_end);
  if ((pe - ps).norm() < std::max(min_length, 1e-6)) return std::nullopt;
  return std::make_pair(*clipped, line_from_endpoints(ps, pe));
}

std::vector<Correspondence> match_lines(std::span<const LineSegment3D> map_lines,
                                        std::span<const Line2D> detected,
                                        const Pose& pose_wc,
                                        const CameraIntrinsics& k,
                                        const MatchThresholds& th) {
  th.validate();
  struct Candidate {
    double mean_distance;
    std::size_t map_index;
    std::size_t det_index;
    double angle;
    double overlap;
  };

  std::vector<std::optional<std::pair<LineSegment3D, Line2D>>> projected;
  projected.reserve(map_lines.size());
  for (const auto& segment : map_lines) {
    projected.push_back(
        project_map_line(segment, pose_wc, k, th.min_projected_length));
  }

  std::vector<Candidate> candidates;
  for (std::size_t m = 0; m < map_lines.size(); ++m) {
    if (!projected[m]) continue;
    const Line2D& proj = projected[m]->second;
    for (std::size_t d = 0; d < detected.size(); ++d) {
      const Line2D& det = detected[d];
      const double mean =
          sampled_distance(det, proj, th.sample_count) / th.sample_count;
      if (mean > th.mean_distance_max) continue;
      const double angle = angle_between(proj, det);
      if (angle > th.angle_max) continue;
      const double overlap = overlap_ratio(proj, det);
      if (overlap < th.overlap_min) continue;
      candidates.push_back({mean, m, d, angle, overlap});
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& x, const Candidate& y) {
              return std::tie(x.mean_distance, x.map_index, x.det_index) <
                     std::tie(y.mean_distance, y.map_index, y.det_index);
            });

  std::vector<bool> map_taken(map_lines.size(), false);
  std::vector<bool> det_taken(detected.size(), false);
  std::vector<std::optional<Correspondence>> by_map(map_lines.size());
  for (const auto& c : candidates) {
    if (map_taken[c.map_index] || det_taken[c.det_index]) continue;
    map_taken[c.map_index] = true;
    det_taken[c.det_index] = true;
    Correspondence corr;
    corr.map_line_id = map_lines[c.map_index].id;
    corr.detection_index = static_cast<int>(c.det_index);
    corr.detected_line = detected[c.det_index];
    corr.projected_line = projected[c.map_index]->second;
    corr.map_segment = projected[c.map_index]->first;
    corr.mean_distance = c.mean_distance;
    corr.angle = c.angle;
    corr.overlap = c.overlap;
    by_map[c.map_index] = corr;
  }

  std::vector<Correspondence> out;
  for (auto& c : by_map) {
    if (c) out.push_back(std::move(*c));
  }
  return out;
}

}  // namespace linteg
