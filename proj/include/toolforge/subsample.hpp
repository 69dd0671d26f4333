#pragma once

#include "toolforge/common.hpp"
#include "toolforge/mutation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace toolforge {

// Two variants share a cluster iff their binary masks are identical.
// Clusters are keyed by the mask string ("101"), ordered lexicographically.
inline std::map<std::string, std::vector<MutationVariant>> mask_cluster(
    const std::vector<MutationVariant>& variants) {
  std::map<std::string, std::vector<MutationVariant>> clusters;
  for (const auto& variant : variants) {
    std::string key;
    for (int bit : variant.mask()) key.push_back(bit ? '1' : '0');
    clusters[key].push_back(variant);
  }
  return clusters;
}

struct QuotaPlan {
  std::vector<size_t> quotas;      // n_g per cluster, aligned with the input order
  std::vector<long> adjustments;   // delta_g applied on top of the base
  size_t total = 0;                // N
};

// n_g = max(1, floor(N * |C_g| / |S|)) + delta_g with Sum n_g = N.
// The remaining budget goes to the largest fractional remainders (ties to the
// smaller cluster index); over-allocation is taken back from the smallest
// remainders while keeping n_g >= 1. Quotas never exceed cluster size.
inline QuotaPlan allocate_quotas(const std::vector<size_t>& cluster_sizes, size_t total) {
  size_t nonempty = 0;
  size_t population = 0;
  for (size_t size : cluster_sizes) {
    if (size > 0) ++nonempty;
    population += size;
  }
  if (total < nonempty)
    throw InvalidArgumentError("budget " + std::to_string(total) +
                               " below the per-cluster floor of 1 (" +
                               std::to_string(nonempty) + " nonempty clusters)");
  if (total > population)
    throw InvalidArgumentError("budget " + std::to_string(total) +
                               " exceeds population " + std::to_string(population));

  const size_t g_count = cluster_sizes.size();
  std::vector<size_t> base(g_count, 0);
  std::vector<double> remainder(g_count, 0.0);
  size_t allocated = 0;
  for (size_t g = 0; g < g_count; ++g) {
    if (cluster_sizes[g] == 0) continue;
    double exact = static_cast<double>(total) * static_cast<double>(cluster_sizes[g]) /
                   static_cast<double>(population);
    base[g] = std::max<size_t>(1, static_cast<size_t>(std::floor(exact)));
    base[g] = std::min(base[g], cluster_sizes[g]);
    remainder[g] = exact - std::floor(exact);
    allocated += base[g];
  }

  std::vector<long> delta(g_count, 0);
  while (allocated < total) {
    size_t best = g_count;
    for (size_t g = 0; g < g_count; ++g) {
      if (cluster_sizes[g] == 0) continue;
      if (base[g] + static_cast<size_t>(delta[g]) >= cluster_sizes[g]) continue;
      size_t candidate_best = best;
      if (candidate_best == g_count ||
          remainder[g] > remainder[candidate_best] + 1e-12)
        best = g;
    }
    if (best == g_count) break;
    ++delta[best];
    remainder[best] -= 1.0;
    ++allocated;
  }
  while (allocated > total) {
    size_t worst = g_count;
    for (size_t g = 0; g < g_count; ++g) {
      if (cluster_sizes[g] == 0) continue;
      long current = static_cast<long>(base[g]) + delta[g];
      if (current <= 1) continue;
      if (worst == g_count || remainder[g] < remainder[worst] - 1e-12) worst = g;
    }
    if (worst == g_count)
      throw IntegrityError("quota correction infeasible");
    --delta[worst];
    remainder[worst] += 1.0;
    --allocated;
  }

  QuotaPlan plan;
  plan.total = total;
  plan.adjustments = delta;
  plan.quotas.resize(g_count, 0);
  for (size_t g = 0; g < g_count; ++g)
    if (cluster_sizes[g] > 0)
      plan.quotas[g] = static_cast<size_t>(static_cast<long>(base[g]) + delta[g]);
  return plan;
}

// Ascending sort by score, division into L equal-sized bins, quota split as
// evenly as possible across bins (remainder to the lowest-index bins), then a
// uniform draw without replacement inside each bin. Bins smaller than their
// share donate the shortfall to neighbors, lowest index first.
inline std::vector<MutationVariant> stratified_bin_sample(
    std::vector<MutationVariant> cluster, size_t quota, size_t bin_count,
    std::uint64_t rng_seed) {
  if (bin_count < 1) throw InvalidArgumentError("bin count must be >= 1");
  if (quota > cluster.size())
    throw InvalidArgumentError("quota exceeds cluster size");
  if (quota == cluster.size()) return cluster;

  std::stable_sort(cluster.begin(), cluster.end(),
                   [](const MutationVariant& a, const MutationVariant& b) {
                     if (a.score != b.score) return a.score < b.score;
                     return a.variant_id < b.variant_id;
                   });

  const size_t effective_bins = std::min(bin_count, std::max<size_t>(cluster.size(), 1));
  std::vector<std::vector<MutationVariant>> bins(effective_bins);
  // Equal-sized bins: spread sizes as evenly as floor/ceil allow.
  size_t per_bin = cluster.size() / effective_bins;
  size_t extra = cluster.size() % effective_bins;
  size_t cursor = 0;
  for (size_t l = 0; l < effective_bins; ++l) {
    size_t size = per_bin + (l < extra ? 1 : 0);
    for (size_t i = 0; i < size; ++i) bins[l].push_back(cluster[cursor++]);
  }

  std::vector<size_t> shares(effective_bins, quota / effective_bins);
  for (size_t l = 0; l < quota % effective_bins; ++l) ++shares[l];

  // Shortfall donation, lowest index first.
  for (size_t l = 0; l < effective_bins; ++l) {
    if (shares[l] <= bins[l].size()) continue;
    size_t shortfall = shares[l] - bins[l].size();
    shares[l] = bins[l].size();
    for (size_t m = 0; m < effective_bins && shortfall > 0; ++m) {
      if (m == l) continue;
      size_t room = bins[m].size() - std::min(bins[m].size(), shares[m]);
      size_t take = std::min(room, shortfall);
      shares[m] += take;
      shortfall -= take;
    }
  }

  auto rng = substream(rng_seed, "stratified_bin_sample");
  std::vector<MutationVariant> selected;
  for (size_t l = 0; l < effective_bins; ++l) {
    std::vector<size_t> order(bins[l].size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t i = 0; i < shares[l]; ++i)
      selected.push_back(bins[l][order[i]]);
  }
  return selected;
}

struct SelectionRecord {
  std::string variant_id;
  std::string mask;
  size_t bin_index = 0;
  double score = 0.0;

  json to_json() const {
    return json{{"variant_id", variant_id}, {"mask", mask},
                {"bin_index", bin_index}, {"score", score}};
  }
};

// Full subsampling pass: mask clustering, quota allocation, per-cluster
// stratified binning. Returns the selected variants plus an audit manifest.
inline std::pair<std::vector<MutationVariant>, std::vector<SelectionRecord>>
subsample(const std::vector<MutationVariant>& variants, size_t total, size_t bin_count,
          std::uint64_t rng_seed) {
  auto clusters = mask_cluster(variants);
  std::vector<std::string> keys;
  std::vector<size_t> sizes;
  for (const auto& [key, members] : clusters) {
    keys.push_back(key);
    sizes.push_back(members.size());
  }
  QuotaPlan plan = allocate_quotas(sizes, total);

  std::vector<MutationVariant> selected;
  std::vector<SelectionRecord> manifest;
  for (size_t g = 0; g < keys.size(); ++g) {
    auto cluster = clusters[keys[g]];
    auto picks = stratified_bin_sample(cluster, plan.quotas[g], bin_count,
                                       rng_seed ^ fnv1a64(keys[g]));

    // Recover bin indices for the audit manifest.
    std::stable_sort(cluster.begin(), cluster.end(),
                     [](const MutationVariant& a, const MutationVariant& b) {
                       if (a.score != b.score) return a.score < b.score;
                       return a.variant_id < b.variant_id;
                     });
    const size_t effective_bins = std::min(bin_count, std::max<size_t>(cluster.size(), 1));
    size_t per_bin = cluster.size() / effective_bins;
    size_t extra = cluster.size() % effective_bins;
    auto bin_of = [&](const std::string& variant_id) -> size_t {
      size_t position = 0;
      for (; position < cluster.size(); ++position)
        if (cluster[position].variant_id == variant_id) break;
      size_t cursor = 0;
      for (size_t l = 0; l < effective_bins; ++l) {
        cursor += per_bin + (l < extra ? 1 : 0);
        if (position < cursor) return l;
      }
      return effective_bins - 1;
    };

    for (const auto& variant : picks) {
      manifest.push_back(
          SelectionRecord{variant.variant_id, keys[g], bin_of(variant.variant_id),
                          variant.score});
      selected.push_back(variant);
    }
  }
  return {std::move(selected), std::move(manifest)};
}

}  // namespace toolforge
