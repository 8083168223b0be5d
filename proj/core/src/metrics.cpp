#include "sgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "sgan/errors.hpp"
#include "sgan/rng.hpp"
#include "sgan/sampler.hpp"
#include "sgan/sh.hpp"

namespace sgan {

namespace {

double dist2(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

double axis_coord(const Vec3& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }

double nearest_brute(const PointCloud& pts, const Vec3& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& p : pts) best = std::min(best, dist2(p, q));
  return best;
}

PointCloud resample(const PointCloud& cloud, std::size_t n, Rng& rng) {
  if (cloud.size() == n) return cloud;
  // partial Fisher-Yates draw without replacement
  std::vector<std::size_t> idx(cloud.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  PointCloud out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + rng.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(cloud[idx[i]]);
  }
  return out;
}

std::vector<double> pair_costs(const PointCloud& a, const PointCloud& b) {
  std::size_t n = a.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = std::sqrt(dist2(a[i], b[j]));
  return cost;
}

}  // namespace

KdTree::KdTree(const PointCloud& points) {
  if (points.empty()) throw std::invalid_argument("KdTree: empty point set");
  std::vector<Vec3> pts = points;
  nodes_.reserve(pts.size());
  root_ = build(pts, 0, int(pts.size()));
}

int KdTree::build(std::vector<Vec3>& pts, int lo, int hi) {
  if (lo >= hi) return -1;
  // split on the widest axis of this block
  Vec3 mn = pts[std::size_t(lo)], mx = mn;
  for (int i = lo + 1; i < hi; ++i) {
    const Vec3& p = pts[std::size_t(i)];
    mn = {std::min(mn.x, p.x), std::min(mn.y, p.y), std::min(mn.z, p.z)};
    mx = {std::max(mx.x, p.x), std::max(mx.y, p.y), std::max(mx.z, p.z)};
  }
  Vec3 spread = mx - mn;
  int axis = 0;
  if (spread.y > spread.x) axis = 1;
  if (axis_coord(spread, 2) > axis_coord(spread, axis)) axis = 2;

  int mid = lo + (hi - lo) / 2;
  std::nth_element(pts.begin() + lo, pts.begin() + mid, pts.begin() + hi,
                   [axis](const Vec3& p, const Vec3& q) {
                     return axis_coord(p, axis) < axis_coord(q, axis);
                   });
  int self = int(nodes_.size());
  nodes_.push_back({pts[std::size_t(mid)], axis, -1, -1});
  int left = build(pts, lo, mid);
  int right = build(pts, mid + 1, hi);
  nodes_[std::size_t(self)].left = left;
  nodes_[std::size_t(self)].right = right;
  return self;
}

void KdTree::search(int node, const Vec3& q, double& best) const {
  if (node < 0) return;
  const Node& nd = nodes_[std::size_t(node)];
  best = std::min(best, dist2(nd.p, q));
  double diff = axis_coord(q, nd.axis) - axis_coord(nd.p, nd.axis);
  int near = diff < 0 ? nd.left : nd.right;
  int far = diff < 0 ? nd.right : nd.left;
  search(near, q, best);
  if (diff * diff < best) search(far, q, best);
}

double KdTree::nearest_dist2(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  search(root_, q, best);
  return best;
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty cloud");
  KdTree ta(a), tb(b);
  double sum = 0.0;
  for (const Vec3& p : a) sum += tb.nearest_dist2(p);
  for (const Vec3& p : b) sum += ta.nearest_dist2(p);
  return sum;
}

double chamfer_normalized(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty cloud");
  KdTree ta(a), tb(b);
  double sa = 0.0, sb = 0.0;
  for (const Vec3& p : a) sa += tb.nearest_dist2(p);
  for (const Vec3& p : b) sb += ta.nearest_dist2(p);
  return sa / double(a.size()) + sb / double(b.size());
}

double chamfer_brute(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty cloud");
  double sum = 0.0;
  for (const Vec3& p : a) sum += nearest_brute(b, p);
  for (const Vec3& p : b) sum += nearest_brute(a, p);
  return sum;
}

double emd_hungarian(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("emd_hungarian: need equal nonempty clouds");
  int n = int(a.size());
  std::vector<double> cost = pair_costs(a, b);
  const double inf = std::numeric_limits<double>::infinity();

  // shortest augmenting path with potentials
  std::vector<double> u(std::size_t(n) + 1, 0.0), v(std::size_t(n) + 1, 0.0);
  std::vector<int> match(std::size_t(n) + 1, 0), way(std::size_t(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(std::size_t(n) + 1, inf);
    std::vector<char> used(std::size_t(n) + 1, 0);
    do {
      used[std::size_t(j0)] = 1;
      int i0 = match[std::size_t(j0)], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[std::size_t(j)]) continue;
        double cur = cost[std::size_t(i0 - 1) * n + std::size_t(j - 1)] - u[std::size_t(i0)] -
                     v[std::size_t(j)];
        if (cur < minv[std::size_t(j)]) {
          minv[std::size_t(j)] = cur;
          way[std::size_t(j)] = j0;
        }
        if (minv[std::size_t(j)] < delta) {
          delta = minv[std::size_t(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[std::size_t(j)]) {
          u[std::size_t(match[std::size_t(j)])] += delta;
          v[std::size_t(j)] -= delta;
        } else {
          minv[std::size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[std::size_t(j0)] != 0);
    do {
      int j1 = way[std::size_t(j0)];
      match[std::size_t(j0)] = match[std::size_t(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  double total = 0.0;
  for (int j = 1; j <= n; ++j)
    total += cost[std::size_t(match[std::size_t(j)] - 1) * n + std::size_t(j - 1)];
  return total / double(n);
}

double emd_auction(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("emd_auction: need equal nonempty clouds");
  int n = int(a.size());
  std::vector<double> cost = pair_costs(a, b);
  if (n == 1) return cost[0];
  double cmax = 0.0;
  for (double c : cost) cmax = std::max(cmax, c);
  if (cmax == 0.0) return 0.0;

  std::vector<double> price(std::size_t(n), 0.0);
  std::vector<int> owner(std::size_t(n), -1), assigned(std::size_t(n), -1);

  // epsilon scaling: each round reassigns everything at a finer bid increment
  const double eps_min = 1e-4 * cmax / n;
  for (double eps = 0.5 * cmax; ; eps *= 0.25) {
    if (eps < eps_min) eps = eps_min;
    std::fill(owner.begin(), owner.end(), -1);
    std::fill(assigned.begin(), assigned.end(), -1);
    std::vector<int> free_list(std::size_t(n), 0);
    for (int i = 0; i < n; ++i) free_list[std::size_t(i)] = i;
    while (!free_list.empty()) {
      int i = free_list.back();
      free_list.pop_back();
      const double* ci = &cost[std::size_t(i) * n];
      // best and runner-up net value
      int best_j = -1;
      double best = std::numeric_limits<double>::infinity(), second = best;
      for (int j = 0; j < n; ++j) {
        double val = ci[j] + price[std::size_t(j)];
        if (val < best) {
          second = best;
          best = val;
          best_j = j;
        } else if (val < second) {
          second = val;
        }
      }
      price[std::size_t(best_j)] += (second - best) + eps;
      int displaced = owner[std::size_t(best_j)];
      owner[std::size_t(best_j)] = i;
      assigned[std::size_t(i)] = best_j;
      if (displaced >= 0) {
        assigned[std::size_t(displaced)] = -1;
        free_list.push_back(displaced);
      }
    }
    if (eps == eps_min) break;
  }

  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost[std::size_t(i) * n + std::size_t(assigned[std::size_t(i)])];
  return total / double(n);
}

double emd(const PointCloud& a, const PointCloud& b, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw std::invalid_argument("emd: empty cloud");
  std::size_t n = std::min(a.size(), b.size());
  Rng rng(seed);
  PointCloud ra = resample(a, n, rng);
  PointCloud rb = resample(b, n, rng);
  return n < 64 ? emd_hungarian(ra, rb) : emd_auction(ra, rb);
}

double mmd(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
           MetricKind kind) {
  if (generated.empty() || reference.empty())
    throw std::invalid_argument("mmd: both sets must be nonempty");
  double sum = 0.0;
  for (const PointCloud& ref : reference) {
    double best = std::numeric_limits<double>::infinity();
    for (const PointCloud& gen : generated) {
      double d = kind == MetricKind::chamfer ? chamfer_normalized(gen, ref) : emd(gen, ref);
      best = std::min(best, d);
    }
    sum += best;
  }
  return sum / double(reference.size());
}

void write_report(const MetricReport& report, std::ostream& os) {
  os << "mmd_chamfer " << report.mmd_chamfer << "\n";
  os << "mmd_emd " << report.mmd_emd << "\n";
  os << "generated " << report.generated << "\n";
  os << "reference " << report.reference << "\n";
}

double roundtrip_error(const PointCloud& cloud, int bandlimit) {
  SphericalGrid grid = pointcloud_to_grid(cloud, bandlimit);
  Smv smv = forward_sht(grid);
  SphericalGrid decoded = inverse_sht(smv, grid);
  return chamfer_normalized(cloud, grid_to_pointcloud(decoded));
}

double roundtrip_error(const TriangleMesh& mesh, int bandlimit) {
  SphericalGrid grid = raycast_sample(normalize_mesh(mesh), bandlimit);
  Smv smv = forward_sht(grid);
  SphericalGrid decoded = inverse_sht(smv, grid);
  return chamfer_normalized(grid_to_pointcloud(grid), grid_to_pointcloud(decoded));
}

}  // namespace sgan
