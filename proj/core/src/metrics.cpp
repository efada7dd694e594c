#include "gridreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "gridreg/ops.hpp"

namespace gridreg {

std::vector<std::int32_t> LabelVolume::vocabulary() const {
  std::set<std::int32_t> s;
  for (auto l : labels)
    if (l != 0) s.insert(l);
  return {s.begin(), s.end()};
}

LabelVolume warp_labels(const LabelVolume& labels, const SamplingGrid& grid) {
  const int n = grid.ndim();
  require(static_cast<int>(labels.extents.size()) == n,
          "warp_labels: dimensionality mismatch");
  const auto osp = grid.spatial();
  const std::int64_t ovox = spatial_size(grid.values.shape());
  auto ist = strides_of(labels.extents);
  const float* pg = grid.values.data();

  LabelVolume out;
  out.extents = osp;
  out.labels.resize(static_cast<size_t>(ovox));
  for (std::int64_t j = 0; j < ovox; ++j) {
    std::int64_t src = 0;
    for (int a = 0; a < n; ++a) {
      const int d = labels.extents[a];
      const float p = (pg[a * ovox + j] + 1.0f) * 0.5f * (d - 1);
      const int idx = std::clamp(static_cast<int>(std::lround(p)), 0, d - 1);
      src += idx * ist[a];
    }
    out.labels[j] = labels.labels[static_cast<size_t>(src)];
  }
  return out;
}

double dice(const LabelVolume& a, const LabelVolume& b, std::int32_t label) {
  require(a.extents == b.extents, "dice: extent mismatch");
  std::int64_t na = 0, nb = 0, inter = 0;
  for (size_t i = 0; i < a.labels.size(); ++i) {
    const bool ia = a.labels[i] == label;
    const bool ib = b.labels[i] == label;
    na += ia;
    nb += ib;
    inter += ia && ib;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

MeanDice mean_dice(const LabelVolume& a, const LabelVolume& b,
                   const std::vector<std::int32_t>& vocabulary) {
  MeanDice out;
  double acc = 0.0;
  for (std::int32_t l : vocabulary) {
    if (l == 0) continue;
    DiceRow row;
    row.label = l;
    row.value = dice(a, b, l);
    std::int64_t na = 0, nb = 0;
    for (size_t i = 0; i < a.labels.size(); ++i) {
      na += a.labels[i] == l;
      nb += b.labels[i] == l;
    }
    row.both_empty = na == 0 && nb == 0;
    acc += row.value;
    out.per_label.push_back(row);
  }
  out.mean = out.per_label.empty() ? 1.0 : acc / out.per_label.size();
  return out;
}

double sd_log_jacobian(const SamplingGrid& grid) {
  Tensor det = jacobian_determinants(grid);
  const auto sp = grid.spatial();
  const int n = grid.ndim();
  auto st = strides_of(sp);
  const float* p = det.data();

  // Two-pass mean/variance over interior voxels.
  std::vector<double> logs;
  std::vector<int> xi(n, 1);
  bool any_interior = true;
  for (int a = 0; a < n; ++a)
    if (sp[a] < 3) any_interior = false;
  if (!any_interior) return 0.0;
  for (;;) {
    std::int64_t j = 0;
    for (int a = 0; a < n; ++a) j += xi[a] * st[a];
    logs.push_back(std::log(std::max(static_cast<double>(p[j]), 1e-9)));
    int a = n - 1;
    for (; a >= 0; --a) {
      if (++xi[a] < sp[a] - 1) break;
      xi[a] = 1;
    }
    if (a < 0) break;
  }
  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= logs.size();
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  var /= logs.size();
  return std::sqrt(var);
}

std::vector<std::vector<int>> boundary_voxels(const LabelVolume& v,
                                              std::int32_t label) {
  const int n = static_cast<int>(v.extents.size());
  auto st = strides_of(v.extents);
  std::vector<std::vector<int>> support;
  std::vector<std::vector<int>> boundary;
  std::vector<int> xi(n, 0);
  std::int64_t j = 0;
  for (;;) {
    if (v.labels[j] == label) {
      support.push_back(xi);
      bool edge = false;
      for (int a = 0; a < n && !edge; ++a) {
        if (xi[a] > 0 && v.labels[j - st[a]] != label) edge = true;
        if (xi[a] + 1 < v.extents[a] && v.labels[j + st[a]] != label)
          edge = true;
      }
      if (edge) boundary.push_back(xi);
    }
    ++j;
    int a = n - 1;
    for (; a >= 0; --a) {
      if (++xi[a] < v.extents[a]) break;
      xi[a] = 0;
    }
    if (a < 0) break;
  }
  return boundary.empty() ? support : boundary;
}

double hd95(const LabelVolume& a, const LabelVolume& b, std::int32_t label) {
  require(a.extents == b.extents, "hd95: extent mismatch");
  auto ba = boundary_voxels(a, label);
  auto bb = boundary_voxels(b, label);
  require(!ba.empty() && !bb.empty(),
          "hd95: undefined metric, empty label support");

  auto directed = [](const std::vector<std::vector<int>>& from,
                     const std::vector<std::vector<int>>& to,
                     std::vector<double>& pool) {
    for (const auto& p : from) {
      double best = 1e300;
      for (const auto& q : to) {
        double d2 = 0.0;
        for (size_t a = 0; a < p.size(); ++a) {
          const double d = p[a] - q[a];
          d2 += d * d;
        }
        best = std::min(best, d2);
      }
      pool.push_back(std::sqrt(best));
    }
  };
  std::vector<double> pool;
  directed(ba, bb, pool);
  directed(bb, ba, pool);
  std::sort(pool.begin(), pool.end());
  if (pool.size() == 1) return pool[0];
  const double pos = 0.95 * (pool.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const double frac = pos - lo;
  if (lo + 1 >= pool.size()) return pool.back();
  return pool[lo] * (1.0 - frac) + pool[lo + 1] * frac;
}

std::string format_report(const std::vector<PairReport>& rows) {
  std::string out =
      "pair\tmean_dice\tper_label_dice\tneg_jac_count\tneg_jac_fraction\t"
      "sd_log_j\thd95_per_label\n";
  char buf[256];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  std::vector<double> dices, fracs, sdlogs;
  for (const auto& r : rows) {
    out += r.pair_id + "\t" + cell(r.dice.mean) + "\t";
    for (size_t i = 0; i < r.dice.per_label.size(); ++i) {
      const auto& d = r.dice.per_label[i];
      out += (i ? "," : "") + std::to_string(d.label) + ":" + cell(d.value);
      if (d.both_empty) out += "(empty)";
    }
    out += "\t" + std::to_string(r.neg_jacobian.count) + "\t" +
           cell(r.neg_jacobian.fraction) + "\t" + cell(r.sd_log_j) + "\t";
    for (size_t i = 0; i < r.hd95_per_label.size(); ++i)
      out += (i ? "," : "") + std::to_string(r.hd95_per_label[i].first) + ":" +
             cell(r.hd95_per_label[i].second);
    out += "\n";
    dices.push_back(r.dice.mean);
    fracs.push_back(r.neg_jacobian.fraction);
    sdlogs.push_back(r.sd_log_j);
  }
  auto mean_std = [&](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.empty() ? 1 : v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    s = v.empty() ? 0.0 : std::sqrt(s / v.size());
    return cell(m) + "+-" + cell(s);
  };
  if (!rows.empty())
    out += "summary\t" + mean_std(dices) + "\t-\t-\t" + mean_std(fracs) +
           "\t" + mean_std(sdlogs) + "\t-\n";
  return out;
}

}  // namespace gridreg
