#ifndef IMGHOP_EVALUATION_HPP
#define IMGHOP_EVALUATION_HPP

#include <string>
#include <vector>

#include "imghop/inference.hpp"
#include "imghop/oracle.hpp"

namespace imghop {

// Compensated (Kahan) accumulator so aggregation order cannot move
// reported means beyond rounding noise.
class KahanSum {
 public:
  void add(double v) {
    double y = v - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0, c_ = 0;
};

// Mean oracle score per hop, index 0 computed on the raw inputs.
struct HopCurve {
  std::vector<double> mean_scores;  // n_hops + 1 entries
  std::size_t sample_count = 0;
  std::string family;
  Direction direction = Direction::kXToY;
};

HopCurve hop_curve(const ModelBundle<float>& bundle, const UnpairedDataset& dataset,
                   const SyntheticFamily& family, int n_hops);

// Mean per-element L1 distance mapped to similarity: 1 - L1/2, in [0, 1].
double preservation_score(const std::vector<Image>& inputs, const std::vector<Image>& outputs);

struct EvalReport {
  HopCurve curve;
  double preservation = 0;  // inputs vs final hops
  double membership = 0;    // mean oracle score of final hops
  std::vector<double> inter_hop_l1;  // mean |hop k - hop k-1| per k = 1..n
  double smoothness_proxy = 0;       // mean of inter_hop_l1
  std::string provenance;            // config / checkpoint description
};

// Translates every dataset item n_hops hops in the natural direction for
// its domain label and aggregates oracle, preservation and inter-hop
// statistics.
EvalReport evaluate(const ModelBundle<float>& bundle, const UnpairedDataset& dataset,
                    const SyntheticFamily& family, int n_hops, const std::string& provenance = "");

// JSON document plus a plain hop-index/mean-score table next to it.
void save_eval_report(const EvalReport& report, const std::string& json_path,
                      const std::string& table_path);
EvalReport load_eval_report(const std::string& json_path);

struct AblationComparison {
  double d_membership = 0;        // b - a
  double d_preservation = 0;      // b - a
  double d_final_score = 0;       // b - a
  double smoothness_proxy_a = 0;
  double smoothness_proxy_b = 0;
};

AblationComparison compare_ablations(const EvalReport& report_a, const EvalReport& report_b);

std::string to_json_string(const AblationComparison& cmp);

}  // namespace imghop

#endif  // IMGHOP_EVALUATION_HPP
