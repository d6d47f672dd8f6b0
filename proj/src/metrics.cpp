#include "dgmn/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace dgmn {

RankResult rank_group(const std::string& gid, const std::vector<double>& scores,
                      const std::vector<int>& labels, int doc_token_count) {
  if (scores.size() != labels.size() || scores.empty())
    throw metric_error("rank_group: scores/labels size mismatch for group " + gid);
  int pos = -1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      if (pos >= 0) throw metric_error("group " + gid + " has more than one positive");
      pos = static_cast<int>(i);
    }
  }
  if (pos < 0) throw metric_error("group " + gid + " has no positive");
  RankResult r;
  r.gid = gid;
  r.scores = scores;
  r.positive_index = pos;
  r.doc_token_count = doc_token_count;
  // a candidate scoring equal to the positive ranks ahead of it
  int ahead = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (static_cast<int>(i) != pos && scores[i] >= scores[static_cast<std::size_t>(pos)]) ++ahead;
  r.rank = ahead + 1;
  return r;
}

Metrics aggregate_metrics(const std::vector<RankResult>& results) {
  Metrics m;
  m.groups = static_cast<int>(results.size());
  if (results.empty()) return m;
  for (const auto& r : results) {
    m.r_at_1 += r.hit(1);
    m.r_at_2 += r.hit(2);
    m.r_at_5 += r.hit(5);
  }
  m.r_at_1 /= m.groups;
  m.r_at_2 /= m.groups;
  m.r_at_5 /= m.groups;
  return m;
}

std::vector<Bucket> bucket_report(const std::vector<RankResult>& results,
                                  const std::vector<double>& edges) {
  if (edges.size() < 2) throw metric_error("bucket_report: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw metric_error("bucket_report: edges must be strictly increasing");
  std::vector<Bucket> buckets(edges.size() - 1);
  std::vector<int> hits(buckets.size(), 0);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    buckets[b].lo = edges[b];
    buckets[b].hi = edges[b + 1];
  }
  for (const auto& r : results) {
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      if (r.doc_token_count > buckets[b].lo && r.doc_token_count <= buckets[b].hi) {
        ++buckets[b].count;
        hits[b] += r.hit(1);
        break;
      }
    }
  }
  for (std::size_t b = 0; b < buckets.size(); ++b)
    if (buckets[b].count > 0) buckets[b].r_at_1 = static_cast<double>(hits[b]) / buckets[b].count;
  return buckets;
}

std::string format_bucket_table(const std::vector<Bucket>& buckets) {
  std::ostringstream os;
  os << std::fixed;
  os << "doc_length      count   r@1\n";
  for (const auto& b : buckets) {
    std::ostringstream edge;
    edge << "(" << b.lo << "," << b.hi << "]";
    os << std::left << std::setw(16) << edge.str() << std::setw(8) << b.count;
    if (b.count > 0)
      os << std::setprecision(4) << b.r_at_1;
    else
      os << "-";
    os << "\n";
  }
  return os.str();
}

}  // namespace dgmn
