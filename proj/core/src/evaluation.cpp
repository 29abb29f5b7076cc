#include "imghop/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace imghop {

using nlohmann::json;

HopCurve hop_curve(const ModelBundle<float>& bundle, const UnpairedDataset& dataset,
                   const SyntheticFamily& family, int n_hops) {
  if (n_hops < 0) throw ContractError("hop_curve: n_hops must be >= 0");
  dataset.validate();
  if (dataset.items.front().height != family.image_size ||
      dataset.items.front().width != family.image_size)
    throw ContractError("hop_curve: dataset size does not match family.image_size");
  if (family.image_size != bundle.generator_spec.input_size)
    throw ContractError("hop_curve: family size does not match the model's input_size");

  const Generator<float>& gen =
      dataset.domain_label == DomainLabel::kX ? bundle.gen_G : bundle.gen_F;

  HopCurve curve;
  curve.family = to_string(family.family_id);
  curve.direction =
      dataset.domain_label == DomainLabel::kX ? Direction::kXToY : Direction::kYToX;
  curve.sample_count = dataset.items.size();

  std::vector<KahanSum> sums(static_cast<std::size_t>(n_hops) + 1);
  for (const Image& img : dataset.items) {
    Tensor<float> cur = image_to_tensor(img);
    sums[0].add(domain_oracle_score(img, family));
    for (int k = 1; k <= n_hops; ++k) {
      cur = gen.forward(cur);
      sums[static_cast<std::size_t>(k)].add(domain_oracle_score(tensor_to_image(cur, 0), family));
    }
  }
  curve.mean_scores.resize(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i)
    curve.mean_scores[i] = sums[i].value() / static_cast<double>(dataset.items.size());
  return curve;
}

double preservation_score(const std::vector<Image>& inputs, const std::vector<Image>& outputs) {
  if (inputs.size() != outputs.size() || inputs.empty())
    throw ContractError("preservation_score: need matching non-empty lists");
  KahanSum total;
  std::size_t elements = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Image& a = inputs[i];
    const Image& b = outputs[i];
    if (a.height != b.height || a.width != b.width)
      throw ContractError("preservation_score: image size mismatch");
    for (std::size_t j = 0; j < a.pixels.size(); ++j)
      total.add(std::abs(static_cast<double>(a.pixels[j]) - static_cast<double>(b.pixels[j])));
    elements += a.pixels.size();
  }
  double mean_l1 = total.value() / static_cast<double>(elements);
  return 1.0 - mean_l1 / 2.0;
}

EvalReport evaluate(const ModelBundle<float>& bundle, const UnpairedDataset& dataset,
                    const SyntheticFamily& family, int n_hops, const std::string& provenance) {
  EvalReport report;
  report.provenance = provenance;
  report.curve = hop_curve(bundle, dataset, family, n_hops);

  const Generator<float>& gen =
      dataset.domain_label == DomainLabel::kX ? bundle.gen_G : bundle.gen_F;

  std::vector<KahanSum> hop_l1(static_cast<std::size_t>(n_hops));
  KahanSum preservation_l1;
  KahanSum membership;
  std::size_t per_image = dataset.items.front().pixels.size();
  for (const Image& img : dataset.items) {
    Tensor<float> prev = image_to_tensor(img);
    Tensor<float> cur = prev;
    for (int k = 1; k <= n_hops; ++k) {
      cur = gen.forward(prev);
      hop_l1[static_cast<std::size_t>(k) - 1].add(l1_mean(cur, prev));
      prev = cur;
    }
    Image final_img = tensor_to_image(cur, 0);
    membership.add(domain_oracle_score(final_img, family));
    for (std::size_t j = 0; j < per_image; ++j)
      preservation_l1.add(
          std::abs(static_cast<double>(img.pixels[j]) - static_cast<double>(final_img.pixels[j])));
  }
  double n_items = static_cast<double>(dataset.items.size());
  report.membership = membership.value() / n_items;
  report.preservation =
      1.0 - preservation_l1.value() / (n_items * static_cast<double>(per_image)) / 2.0;
  report.inter_hop_l1.resize(hop_l1.size());
  KahanSum proxy;
  for (std::size_t k = 0; k < hop_l1.size(); ++k) {
    report.inter_hop_l1[k] = hop_l1[k].value() / n_items;
    proxy.add(report.inter_hop_l1[k]);
  }
  report.smoothness_proxy =
      hop_l1.empty() ? 0.0 : proxy.value() / static_cast<double>(hop_l1.size());
  return report;
}

void save_eval_report(const EvalReport& report, const std::string& json_path,
                      const std::string& table_path) {
  json j;
  j["note"] =
      "Scores use pixel-space L1 similarity and analytic domain oracles rather than learned "
      "perceptual metrics or pretrained segmentation.";
  j["family"] = report.curve.family;
  j["direction"] = to_string(report.curve.direction);
  j["sample_count"] = report.curve.sample_count;
  j["hop_curve"] = report.curve.mean_scores;
  j["preservation"] = report.preservation;
  j["membership"] = report.membership;
  j["inter_hop_l1"] = report.inter_hop_l1;
  j["smoothness_proxy"] = report.smoothness_proxy;
  j["provenance"] = report.provenance;
  std::ofstream os(json_path);
  if (!os) throw Error("save_eval_report: cannot write " + json_path);
  os << j.dump(2) << "\n";

  if (!table_path.empty()) {
    std::ofstream table(table_path);
    if (!table) throw Error("save_eval_report: cannot write " + table_path);
    table << "hop\tmean_score\n";
    for (std::size_t i = 0; i < report.curve.mean_scores.size(); ++i)
      table << i << "\t" << report.curve.mean_scores[i] << "\n";
  }
}

EvalReport load_eval_report(const std::string& json_path) {
  std::ifstream is(json_path);
  if (!is) throw ConfigError("load_eval_report: cannot open " + json_path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("load_eval_report: malformed report: ") + e.what());
  }
  EvalReport report;
  report.curve.family = j.at("family").get<std::string>();
  report.curve.direction =
      j.at("direction").get<std::string>() == "x_to_y" ? Direction::kXToY : Direction::kYToX;
  report.curve.sample_count = j.at("sample_count").get<std::size_t>();
  report.curve.mean_scores = j.at("hop_curve").get<std::vector<double>>();
  report.preservation = j.at("preservation").get<double>();
  report.membership = j.at("membership").get<double>();
  report.inter_hop_l1 = j.at("inter_hop_l1").get<std::vector<double>>();
  report.smoothness_proxy = j.at("smoothness_proxy").get<double>();
  report.provenance = j.value("provenance", "");
  return report;
}

AblationComparison compare_ablations(const EvalReport& report_a, const EvalReport& report_b) {
  AblationComparison cmp;
  cmp.d_membership = report_b.membership - report_a.membership;
  cmp.d_preservation = report_b.preservation - report_a.preservation;
  double final_a = report_a.curve.mean_scores.empty() ? 0 : report_a.curve.mean_scores.back();
  double final_b = report_b.curve.mean_scores.empty() ? 0 : report_b.curve.mean_scores.back();
  cmp.d_final_score = final_b - final_a;
  cmp.smoothness_proxy_a = report_a.smoothness_proxy;
  cmp.smoothness_proxy_b = report_b.smoothness_proxy;
  return cmp;
}

std::string to_json_string(const AblationComparison& cmp) {
  json j{{"d_membership", cmp.d_membership},
         {"d_preservation", cmp.d_preservation},
         {"d_final_score", cmp.d_final_score},
         {"smoothness_proxy_a", cmp.smoothness_proxy_a},
         {"smoothness_proxy_b", cmp.smoothness_proxy_b}};
  return j.dump(2);
}

}  // namespace imghop
