#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "shiftlab/model/model.hpp"
#include "shiftlab/model/train.hpp"

namespace shiftlab::metrics {

struct EvalConfig {
  double tau = 0.5;     // threshold on sigmoid(logit)
  double epsilon = 1e-12;  // floor on predicted probabilities in KL

  void validate() const;  // ConfigError unless 0 < tau < 1 and epsilon > 0
};

// |P n G| / |P u G| with P = {sigmoid(logit) > tau}, G = {gt > 0.5}.
// Both empty gives 1, P empty with G non-empty gives 0.
template <typename T>
double mean_iou(const BasicTensor<T>& logits, const Tensor& gt, double tau);

// KL(g || q) with g = gt / sum(gt) and q = softmax(logits); q is floored at
// epsilon inside the log. ValidationError when gt has no mass.
template <typename T>
double kl_divergence(const Tensor& gt, const BasicTensor<T>& logits, double epsilon);

// Which query slots are hidden at evaluation time.
enum class MaskMode { kNone, kSubject, kObject, kBoth };
MaskMode mask_mode_from_string(const std::string& s);  // ConfigError
std::string to_string(MaskMode m);
scene::Query apply_mask(scene::Query q, MaskMode m);

struct QueryRecord {
  std::string scene_id;
  scene::Query query;  // as grounded, before masking
  bool subject_ambiguous = false, object_ambiguous = false;
  double s_iou = 0, o_iou = 0, s_kl = 0, o_kl = 0;
};

// Final logits of every query in split order.
template <typename T>
std::vector<model::Prediction<float>> predict_split(const model::Model<T>& m, const model::Split& split,
                                                    const scene::Vocabulary& vocab, MaskMode mask = MaskMode::kNone);

std::vector<QueryRecord> score(const model::Split& split, const std::vector<model::Prediction<float>>& preds,
                               const EvalConfig& config);

// Grid 0.1, 0.2, ..., 0.9 maximizing mean(S-IoU, O-IoU); ties keep the smaller tau.
double select_tau(const model::Split& split, const std::vector<model::Prediction<float>>& preds);

// One table row. Subject columns average over records whose subject belongs to
// the row, object columns over records whose object does; n counts records in
// either role. Means are taken over sorted values so row values do not depend
// on record order. Empty columns are NaN.
struct Aggregate {
  std::string category;
  std::size_t n = 0, n_subject = 0, n_object = 0;
  double s_iou = 0, o_iou = 0, s_kl = 0, o_kl = 0;
};

struct Report {
  Aggregate overall;
  // Subject columns over subject-ambiguous records, object columns over
  // object-ambiguous records.
  Aggregate ambiguous;
  std::vector<Aggregate> by_predicate;  // vocabulary order
  std::vector<Aggregate> by_entity;     // vocabulary order
};

Report build_report(const std::vector<QueryRecord>& records, const scene::Vocabulary& vocab);

// metrics.csv (per query), report_by_predicate.csv (predicates then "all" and
// "ambiguous"), report_by_entity.csv.
void write_report(const std::filesystem::path& dir, const std::vector<QueryRecord>& records, const Report& report,
                  const scene::Vocabulary& vocab);

// Shortest round-trip formatting; NaN as "-".
std::string format_number(double v);

}  // namespace shiftlab::metrics
