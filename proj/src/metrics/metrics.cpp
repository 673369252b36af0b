#include "shiftlab/metrics/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "shiftlab/core/error.hpp"
#include "shiftlab/core/parallel.hpp"
#include "shiftlab/scene/io.hpp"

namespace shiftlab::metrics {

void EvalConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("eval: tau must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("eval: epsilon must be positive");
}

namespace {

void require_same_grid(const Shape& a, const Shape& b, const char* what) {
  require_rank(a, 2, what);
  require_shape(b, a, what);
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

template <typename T>
double mean_iou(const BasicTensor<T>& logits, const Tensor& gt, double tau) {
  require_same_grid(gt.shape(), logits.shape(), "mean_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = sigmoid(static_cast<double>(logits[i])) > tau;
    const bool g = gt[i] > 0.5f;
    inter += p && g;
    uni += p || g;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

template <typename T>
double kl_divergence(const Tensor& gt, const BasicTensor<T>& logits, double epsilon) {
  require_same_grid(gt.shape(), logits.shape(), "kl_divergence");
  double mass = 0.0, zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < 0.0f) throw ValidationError("kl_divergence: ground truth has negative entries");
    mass += gt[i];
    zmax = std::max(zmax, static_cast<double>(logits[i]));
  }
  if (!(mass > 0.0)) throw ValidationError("kl_divergence: ground truth has no mass");
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) denom += std::exp(static_cast<double>(logits[i]) - zmax);
  double kl = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == 0.0f) continue;
    const double g = gt[i] / mass;
    const double q = std::exp(static_cast<double>(logits[i]) - zmax) / denom;
    kl += g * std::log(g / std::max(q, epsilon));
  }
  return std::max(kl, 0.0);
}

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "none") return MaskMode::kNone;
  if (s == "subject") return MaskMode::kSubject;
  if (s == "object") return MaskMode::kObject;
  if (s == "both") return MaskMode::kBoth;
  throw ConfigError("unknown mask mode '" + s + "' (expected none, subject, object or both)");
}

std::string to_string(MaskMode m) {
  switch (m) {
    case MaskMode::kNone: return "none";
    case MaskMode::kSubject: return "subject";
    case MaskMode::kObject: return "object";
    case MaskMode::kBoth: return "both";
  }
  return "none";
}

scene::Query apply_mask(scene::Query q, MaskMode m) {
  if (m == MaskMode::kSubject || m == MaskMode::kBoth) q.subject = scene::kMasked;
  if (m == MaskMode::kObject || m == MaskMode::kBoth) q.object = scene::kMasked;
  return q;
}

template <typename T>
std::vector<model::Prediction<float>> predict_split(const model::Model<T>& m, const model::Split& split,
                                                    const scene::Vocabulary& vocab, MaskMode mask) {
  const std::vector<BasicTensor<T>> features = model::encode_all(m, *split.scenes, vocab);
  std::vector<model::Prediction<float>> out(split.queries.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const auto& gq = split.queries[i];
    const auto p = m.predict(features[gq.scene], apply_mask(gq.query, mask));
    out[i] = {p.subject.template cast<float>(), p.object.template cast<float>()};
  });
  return out;
}

std::vector<QueryRecord> score(const model::Split& split, const std::vector<model::Prediction<float>>& preds,
                               const EvalConfig& config) {
  config.validate();
  if (preds.size() != split.queries.size()) {
    throw ValidationError("score: " + std::to_string(preds.size()) + " predictions for " +
                          std::to_string(split.queries.size()) + " queries");
  }
  std::vector<QueryRecord> out(preds.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const auto& gq = split.queries[i];
    QueryRecord& r = out[i];
    r.scene_id = (*split.scenes)[gq.scene].id;
    r.query = gq.query;
    r.subject_ambiguous = gq.subject_ambiguous;
    r.object_ambiguous = gq.object_ambiguous;
    r.s_iou = mean_iou(preds[i].subject, gq.subject.grid, config.tau);
    r.o_iou = mean_iou(preds[i].object, gq.object.grid, config.tau);
    r.s_kl = kl_divergence(gq.subject.grid, preds[i].subject, config.epsilon);
    r.o_kl = kl_divergence(gq.object.grid, preds[i].object, config.epsilon);
  });
  return out;
}

double select_tau(const model::Split& split, const std::vector<model::Prediction<float>>& preds) {
  if (preds.size() != split.queries.size()) throw ValidationError("select_tau: prediction count mismatch");
  double best_tau = 0.1, best = -1.0;
  for (int k = 1; k <= 9; ++k) {
    const double tau = k / 10.0;
    std::vector<double> v(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      v[i] = 0.5 * (mean_iou(preds[i].subject, split.queries[i].subject.grid, tau) +
                    mean_iou(preds[i].object, split.queries[i].object.grid, tau));
    }
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    if (s > best) {
      best = s;
      best_tau = tau;
    }
  }
  return best_tau;
}

namespace {

double sorted_mean(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

template <typename InSubject, typename InObject>
Aggregate aggregate(std::string name, const std::vector<QueryRecord>& records, InSubject in_s, InObject in_o) {
  Aggregate a;
  a.category = std::move(name);
  std::vector<double> si, oi, sk, ok;
  for (const auto& r : records) {
    const bool s = in_s(r), o = in_o(r);
    if (s) {
      si.push_back(r.s_iou);
      sk.push_back(r.s_kl);
    }
    if (o) {
      oi.push_back(r.o_iou);
      ok.push_back(r.o_kl);
    }
    a.n += s || o;
  }
  a.n_subject = si.size();
  a.n_object = oi.size();
  a.s_iou = sorted_mean(si);
  a.o_iou = sorted_mean(oi);
  a.s_kl = sorted_mean(sk);
  a.o_kl = sorted_mean(ok);
  return a;
}

}  // namespace

Report build_report(const std::vector<QueryRecord>& records, const scene::Vocabulary& vocab) {
  Report rep;
  const auto all = [](const QueryRecord&) { return true; };
  rep.overall = aggregate("all", records, all, all);
  rep.ambiguous = aggregate(
      "ambiguous", records, [](const QueryRecord& r) { return r.subject_ambiguous; },
      [](const QueryRecord& r) { return r.object_ambiguous; });
  for (std::size_t p = 0; p < vocab.predicates.size(); ++p) {
    const auto match = [p](const QueryRecord& r) { return r.query.predicate == static_cast<int>(p); };
    rep.by_predicate.push_back(aggregate(vocab.predicates[p], records, match, match));
  }
  for (std::size_t c = 0; c < vocab.categories.size(); ++c) {
    const int id = static_cast<int>(c);
    rep.by_entity.push_back(aggregate(
        vocab.categories[c], records, [id](const QueryRecord& r) { return r.query.subject == id; },
        [id](const QueryRecord& r) { return r.query.object == id; }));
  }
  return rep;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "-";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string name_of(const std::vector<std::string>& names, int id) {
  if (id == scene::kMasked) return "_";
  return names.at(static_cast<std::size_t>(id));
}

void row(std::ostringstream& os, const Aggregate& a) {
  os << a.category << ',' << a.n << ',' << format_number(a.s_iou) << ',' << format_number(a.o_iou) << ','
     << format_number(a.s_kl) << ',' << format_number(a.o_kl) << '\n';
}

}  // namespace

void write_report(const std::filesystem::path& dir, const std::vector<QueryRecord>& records, const Report& report,
                  const scene::Vocabulary& vocab) {
  std::filesystem::create_directories(dir);
  std::ostringstream q;
  q << "scene,subject,predicate,object,subject_ambiguous,object_ambiguous,s_iou,o_iou,s_kl,o_kl\n";
  for (const auto& r : records) {
    q << r.scene_id << ',' << name_of(vocab.categories, r.query.subject) << ','
      << name_of(vocab.predicates, r.query.predicate) << ',' << name_of(vocab.categories, r.query.object) << ','
      << r.subject_ambiguous << ',' << r.object_ambiguous << ',' << format_number(r.s_iou) << ','
      << format_number(r.o_iou) << ',' << format_number(r.s_kl) << ',' << format_number(r.o_kl) << '\n';
  }
  scene::write_text_file(dir / "metrics.csv", q.str());

  const char* header = "category,n,s_iou,o_iou,s_kl,o_kl\n";
  std::ostringstream p;
  p << header;
  for (const auto& a : report.by_predicate) row(p, a);
  row(p, report.overall);
  row(p, report.ambiguous);
  scene::write_text_file(dir / "report_by_predicate.csv", p.str());

  std::ostringstream e;
  e << header;
  for (const auto& a : report.by_entity) row(e, a);
  scene::write_text_file(dir / "report_by_entity.csv", e.str());
}

template double mean_iou<float>(const Tensor&, const Tensor&, double);
template double mean_iou<double>(const BasicTensor<double>&, const Tensor&, double);
template double kl_divergence<float>(const Tensor&, const Tensor&, double);
template double kl_divergence<double>(const Tensor&, const BasicTensor<double>&, double);
template std::vector<model::Prediction<float>> predict_split<float>(const model::Model<float>&, const model::Split&,
                                                                    const scene::Vocabulary&, MaskMode);
template std::vector<model::Prediction<float>> predict_split<double>(const model::Model<double>&,
                                                                     const model::Split&, const scene::Vocabulary&,
                                                                     MaskMode);

}  // namespace shiftlab::metrics
