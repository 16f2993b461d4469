#include "zrecon/segment.hpp"

#include "zrecon/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace zrecon {

namespace {

class DisjointSet {
public:
  explicit DisjointSet(std::size_t n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // The smaller index becomes the root so results do not depend on union order details.
  std::uint32_t join(std::uint32_t a, std::uint32_t b, double w) {
    if (a > b) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    internal_[a] = w;
    return a;
  }
  std::uint32_t size(std::uint32_t r) const { return size_[r]; }
  double internal(std::uint32_t r) const { return internal_[r]; }

private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
  std::vector<double> internal_;
};

struct Edge {
  float w;
  std::uint32_t a, b;
};

std::vector<double> smooth(std::size_t w, std::size_t h, std::span<const double> in, double sigma) {
  std::vector<double> out(in.begin(), in.end());
  if (sigma <= 0.0) return out;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double sum = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& k : kernel) k /= sum;
  auto clampi = [](long v, long n) { return std::clamp(v, 0L, n - 1); };
  std::vector<double> tmp(in.size());
  const long W = static_cast<long>(w), H = static_cast<long>(h);
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[static_cast<std::size_t>(i + radius)] * in[static_cast<std::size_t>(y * W + clampi(x + i, W))];
      tmp[static_cast<std::size_t>(y * W + x)] = s;
    }
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(clampi(y + i, H) * W + x)];
      out[static_cast<std::size_t>(y * W + x)] = s;
    }
  return out;
}

// Splits labels into 4-connected components, numbered in first-pixel order.
std::vector<std::int32_t> connected_components(std::size_t w, std::size_t h, const std::vector<std::int32_t>& labels,
                                               std::size_t& count) {
  std::vector<std::int32_t> out(labels.size(), -1);
  std::vector<std::size_t> stack;
  std::int32_t next = 0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (out[s] >= 0) continue;
    out[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t x = p % w, y = p / w;
      auto visit = [&](std::size_t q) {
        if (out[q] < 0 && labels[q] == labels[p]) {
          out[q] = next;
          stack.push_back(q);
        }
      };
      if (x > 0) visit(p - 1);
      if (x + 1 < w) visit(p + 1);
      if (y > 0) visit(p - w);
      if (y + 1 < h) visit(p + w);
    }
    ++next;
  }
  count = static_cast<std::size_t>(next);
  return out;
}

// Absorbs segments below min_size into the 4-adjacent segment with the closest mean
// feature, visiting segments in label order and growing each until it is large enough.
void merge_small(SegmentLabelMap& m, std::span<const double> fh, std::span<const double> fl, std::size_t min_size) {
  const std::size_t w = m.width, h = m.height, count = m.count;
  std::vector<std::uint32_t> parent(count);
  std::iota(parent.begin(), parent.end(), 0u);
  std::vector<std::size_t> size(count, 0);
  std::vector<double> sh(count, 0.0), sl(count, 0.0);
  std::vector<std::vector<std::uint32_t>> adj(count);
  for (std::size_t p = 0; p < m.labels.size(); ++p) {
    const auto l = static_cast<std::uint32_t>(m.labels[p]);
    ++size[l];
    sh[l] += fh[p];
    sl[l] += fl[p];
    const std::size_t x = p % w, y = p / w;
    if (x + 1 < w && m.labels[p + 1] != m.labels[p]) {
      adj[l].push_back(static_cast<std::uint32_t>(m.labels[p + 1]));
      adj[static_cast<std::size_t>(m.labels[p + 1])].push_back(l);
    }
    if (y + 1 < h && m.labels[p + w] != m.labels[p]) {
      adj[l].push_back(static_cast<std::uint32_t>(m.labels[p + w]));
      adj[static_cast<std::size_t>(m.labels[p + w])].push_back(l);
    }
  }
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::uint32_t s = 0; s < count; ++s) {
    std::uint32_t r = find(s);
    while (size[r] < min_size) {
      const double mh = sh[r] / static_cast<double>(size[r]), ml = sl[r] / static_cast<double>(size[r]);
      std::int64_t best = -1;
      double best_d = 0.0;
      for (std::uint32_t& t : adj[r]) {
        t = find(t);
        if (t == r) continue;
        const double d = std::hypot(sh[t] / static_cast<double>(size[t]) - mh, sl[t] / static_cast<double>(size[t]) - ml);
        if (best < 0 || d < best_d || (d == best_d && t < best)) {
          best = t;
          best_d = d;
        }
      }
      if (best < 0) break;  // the whole image is one segment
      auto keep = r, gone = static_cast<std::uint32_t>(best);
      if (adj[keep].size() < adj[gone].size()) std::swap(keep, gone);
      parent[gone] = keep;
      size[keep] += size[gone];
      sh[keep] += sh[gone];
      sl[keep] += sl[gone];
      adj[keep].insert(adj[keep].end(), adj[gone].begin(), adj[gone].end());
      adj[gone] = {};
      r = keep;
    }
  }
  for (auto& l : m.labels) l = static_cast<std::int32_t>(find(static_cast<std::uint32_t>(l)));
  m.normalize();
}

}  // namespace

std::vector<std::vector<std::size_t>> SegmentLabelMap::segments() const {
  std::vector<std::vector<std::size_t>> out(count);
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

void SegmentLabelMap::normalize() {
  if (labels.size() != width * height) fail_input("label map size mismatch");
  std::vector<std::int32_t> remap;
  std::int32_t next = 0;
  for (auto& l : labels) {
    if (l < 0) fail_input("label map has negative labels");
    if (static_cast<std::size_t>(l) >= remap.size()) remap.resize(static_cast<std::size_t>(l) + 1, -1);
    auto& r = remap[static_cast<std::size_t>(l)];
    if (r < 0) r = next++;
    l = r;
  }
  count = static_cast<std::size_t>(next);
}

PlaneSet SegmentLabelMap::to_planes() const {
  PlaneSet ps;
  ps.kind = "labels";
  ps.width = width;
  ps.height = height;
  ps.add("label", std::vector<double>(labels.begin(), labels.end()));
  ps.meta["segments"] = count;
  return ps;
}

SegmentLabelMap SegmentLabelMap::from_planes(const PlaneSet& ps) {
  SegmentLabelMap m;
  m.width = ps.width;
  m.height = ps.height;
  const auto& p = ps.plane("label");
  m.labels.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || p[i] != std::floor(p[i])) fail_input("label plane must hold non-negative integers");
    m.labels[i] = static_cast<std::int32_t>(p[i]);
  }
  m.normalize();
  return m;
}

SegmentLabelMap felzenszwalb_segment(std::size_t width, std::size_t height, std::span<const double> alpha_h,
                                     std::span<const double> alpha_l, const SegmentParams& params) {
  const std::size_t n = width * height;
  if (n == 0 || alpha_h.size() != n || alpha_l.size() != n) fail_input("segmentation: plane size mismatch");
  if (!(params.sigma >= 0.0) || !(params.k > 0.0) || params.min_size == 0 || !(params.scale > 0.0))
    fail_input("segmentation parameters must be positive");
  if (n > 0xffffffffu) fail_input("segmentation: image too large");
  std::vector<double> fh(n), fl(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(alpha_h[i]) || !std::isfinite(alpha_l[i])) fail_input("segmentation: non-finite pixel; mask it first");
    fh[i] = alpha_h[i] * params.scale;
    fl[i] = alpha_l[i] * params.scale;
  }
  fh = smooth(width, height, fh, params.sigma);
  fl = smooth(width, height, fl, params.sigma);

  std::vector<Edge> edges;
  edges.reserve(4 * n);
  auto add = [&](std::size_t a, std::size_t b) {
    edges.push_back({static_cast<float>(std::hypot(fh[a] - fh[b], fl[a] - fl[b])), static_cast<std::uint32_t>(a),
                     static_cast<std::uint32_t>(b)});
  };
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t p = y * width + x;
      if (x + 1 < width) add(p, p + 1);
      if (y + 1 < height) {
        add(p, p + width);
        if (x + 1 < width) add(p, p + width + 1);
        if (x > 0) add(p, p + width - 1);
      }
    }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.w < b.w; });

  DisjointSet ds(n);
  for (const Edge& e : edges) {
    const std::uint32_t a = ds.find(e.a), b = ds.find(e.b);
    if (a == b) continue;
    const double ta = ds.internal(a) + params.k / ds.size(a);
    const double tb = ds.internal(b) + params.k / ds.size(b);
    if (e.w <= std::min(ta, tb)) ds.join(a, b, e.w);
  }
  for (const Edge& e : edges) {
    const std::uint32_t a = ds.find(e.a), b = ds.find(e.b);
    if (a != b && (ds.size(a) < params.min_size || ds.size(b) < params.min_size)) ds.join(a, b, ds.internal(std::min(a, b)));
  }
  std::vector<std::int32_t> roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = static_cast<std::int32_t>(ds.find(static_cast<std::uint32_t>(i)));

  SegmentLabelMap m;
  m.width = width;
  m.height = height;
  m.labels = connected_components(width, height, roots, m.count);
  merge_small(m, fh, fl, params.min_size);
  return m;
}

SegmentLabelMap felzenszwalb_segment(const PlaneSet& image, const SegmentParams& params) {
  return felzenszwalb_segment(image.width, image.height, image.plane("alpha_h"), image.plane("alpha_l"), params);
}

SegmentLabelMap labels_from_regions(std::size_t width, std::size_t height, std::span<const int> regions) {
  if (regions.size() != width * height) fail_input("region map size mismatch");
  SegmentLabelMap m;
  m.width = width;
  m.height = height;
  std::vector<std::int32_t> r(regions.begin(), regions.end());
  m.labels = connected_components(width, height, r, m.count);
  return m;
}

}  // namespace zrecon
