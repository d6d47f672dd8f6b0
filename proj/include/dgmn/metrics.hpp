#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgmn {

struct metric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-context candidate scores with the derived r@k indicators.
// Ties rank ahead of the positive (pessimistic rank).
struct RankResult {
  std::string gid;
  std::vector<double> scores;  // candidate pool, input order
  int positive_index = -1;
  int rank = 0;  // 1-based pessimistic rank of the positive
  int doc_token_count = 0;

  bool hit(int k) const { return rank <= k; }
};

// labels must contain exactly one 1 per group
RankResult rank_group(const std::string& gid, const std::vector<double>& scores,
                      const std::vector<int>& labels, int doc_token_count = 0);

struct Metrics {
  double r_at_1 = 0, r_at_2 = 0, r_at_5 = 0;
  int groups = 0;
};

Metrics aggregate_metrics(const std::vector<RankResult>& results);

struct Bucket {
  double lo = 0, hi = 0;  // (lo, hi]
  int count = 0;
  double r_at_1 = 0;  // meaningless when count == 0
};

// edges strictly increasing; bucket b covers (edges[b], edges[b+1]]
std::vector<Bucket> bucket_report(const std::vector<RankResult>& results,
                                  const std::vector<double>& edges);

std::string format_bucket_table(const std::vector<Bucket>& buckets);

}  // namespace dgmn
