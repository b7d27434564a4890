#include "sonar/metrics/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sonar/common.hpp"

namespace sonar::metrics {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// JSON has no -inf literal, so non-finite values travel as strings.
Json encode_double(double v) {
  if (std::isnan(v)) return Json("nan");
  if (std::isinf(v)) return Json(v > 0 ? "inf" : "-inf");
  return Json(v);
}

double decode_double(const Json& j, const char* field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    if (s == "-inf") return -kInf;
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConfigError(std::string("metrics json: bad value for ") + field);
}

}  // namespace

int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& labels, size_t num_classes) {
  if (preds.size() != labels.size())
    throw ConfigError("confusion: prediction and label counts differ");
  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.assign(num_classes * num_classes, 0);
  for (size_t i = 0; i < preds.size(); ++i) {
    int t = labels[i], p = preds[i];
    if (t < 0 || p < 0 || size_t(t) >= num_classes || size_t(p) >= num_classes)
      throw ConfigError("confusion: class index out of range at sample " +
                        std::to_string(i));
    ++cm.at(size_t(t), size_t(p));
  }
  return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  const size_t c = cm.num_classes;
  ClassificationMetrics m;
  m.per_class_precision.resize(c, 0.0);
  m.per_class_recall.resize(c, 0.0);
  m.per_class_f1.resize(c, 0.0);

  int64_t diag = 0;
  for (size_t k = 0; k < c; ++k) diag += cm.at(k, k);
  int64_t total = cm.total();
  m.accuracy = total > 0 ? double(diag) / double(total) : 0.0;

  for (size_t k = 0; k < c; ++k) {
    int64_t tp = cm.at(k, k);
    int64_t row = 0, col = 0;
    for (size_t j = 0; j < c; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    double prec = col > 0 ? double(tp) / double(col) : 0.0;
    double rec = row > 0 ? double(tp) / double(row) : 0.0;
    double f1 = (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    m.per_class_precision[k] = prec;
    m.per_class_recall[k] = rec;
    m.per_class_f1[k] = f1;
    m.precision += prec;
    m.recall += rec;
    m.f1 += f1;
  }
  if (c > 0) {
    m.precision /= double(c);
    m.recall /= double(c);
    m.f1 /= double(c);
  }
  return m;
}

double mcc(const ConfusionMatrix& cm) {
  const size_t k = cm.num_classes;
  double correct = 0, s = 0, pt = 0, pp = 0, tt = 0;
  std::vector<double> row(k, 0.0), col(k, 0.0);
  for (size_t t = 0; t < k; ++t)
    for (size_t p = 0; p < k; ++p) {
      double v = double(cm.at(t, p));
      s += v;
      row[t] += v;
      col[p] += v;
      if (t == p) correct += v;
    }
  for (size_t i = 0; i < k; ++i) {
    pt += col[i] * row[i];
    pp += col[i] * col[i];
    tt += row[i] * row[i];
  }
  double num = correct * s - pt;
  double den = std::sqrt(s * s - pp) * std::sqrt(s * s - tt);
  return den > 0 ? num / den : 0.0;
}

FdrReport fdr(const std::vector<float>& embeddings, size_t dim,
              const std::vector<int>& labels, size_t num_classes,
              FdrAggregate aggregate) {
  const size_t n = labels.size();
  if (dim == 0) throw ConfigError("fdr: embedding dimension must be positive");
  if (embeddings.size() != n * dim)
    throw ConfigError("fdr: embedding buffer does not match N x d");

  std::vector<size_t> class_count(num_classes, 0);
  for (size_t i = 0; i < n; ++i) {
    int l = labels[i];
    if (l < 0 || size_t(l) >= num_classes)
      throw ConfigError("fdr: label out of range at sample " +
                        std::to_string(i));
    ++class_count[size_t(l)];
  }
  for (size_t c = 0; c < num_classes; ++c)
    if (class_count[c] < 2)
      throw ConfigError("fdr: class " + std::to_string(c) +
                        " has fewer than 2 samples");

  Eigen::MatrixXd x(n, dim);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < dim; ++j) x(long(i), long(j)) = embeddings[i * dim + j];

  Eigen::RowVectorXd global_mean = x.colwise().mean();

  constexpr double kEps = 1e-12;
  FdrReport rep;
  rep.per_class_log.resize(num_classes);
  double agg = 0.0;
  for (size_t c = 0; c < num_classes; ++c) {
    const long nc = long(class_count[c]);
    Eigen::MatrixXd xc(nc, dim);
    long r = 0;
    for (size_t i = 0; i < n; ++i)
      if (size_t(labels[i]) == c) xc.row(r++) = x.row(long(i));
    Eigen::RowVectorXd mu = xc.colwise().mean();
    xc.rowwise() -= mu;

    // S_B is rank one, so its Frobenius norm is N_c times the squared
    // mean offset.  For S_W = Xc' Xc use whichever Gram product is smaller:
    // ||Xc' Xc||_F == ||Xc Xc'||_F.
    double sb = double(nc) * (mu - global_mean).squaredNorm();
    double sw;
    if (size_t(nc) <= dim) {
      Eigen::MatrixXd gram = xc * xc.transpose();
      sw = gram.norm();
    } else {
      Eigen::MatrixXd scatter = xc.transpose() * xc;
      sw = scatter.norm();
    }
    double ratio = sb / (sw + kEps);
    rep.per_class_log[c] = std::log(ratio);  // log(0) -> -inf sentinel
    agg += ratio;
  }
  if (aggregate == FdrAggregate::Mean && num_classes > 0)
    agg /= double(num_classes);
  rep.overall_log = std::log(agg);
  return rep;
}

void export_embeddings(const std::vector<float>& embeddings, size_t dim,
                       const std::vector<int>& labels,
                       const std::string& path) {
  const size_t n = labels.size();
  if (embeddings.size() != n * dim)
    throw ConfigError("export_embeddings: buffer does not match N x d");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "label";
  for (size_t j = 0; j < dim; ++j) out << ",e_" << j;
  out << "\n";
  char buf[32];
  for (size_t i = 0; i < n; ++i) {
    out << labels[i];
    for (size_t j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", double(embeddings[i * dim + j]));
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw ConfigError("write failed: " + path);
}

std::string MetricsReport::to_json() const {
  Json j;
  j["accuracy"] = encode_double(cls.accuracy);
  j["precision"] = encode_double(cls.precision);
  j["recall"] = encode_double(cls.recall);
  j["f1"] = encode_double(cls.f1);
  j["mcc"] = encode_double(mcc);
  Json pc = Json::array();
  for (double v : fdr.per_class_log) pc.push_back(encode_double(v));
  j["per_class_fdr"] = pc;
  j["overall_fdr"] = encode_double(fdr.overall_log);
  Json ppc = Json::array(), rpc = Json::array(), fpc = Json::array();
  for (double v : cls.per_class_precision) ppc.push_back(encode_double(v));
  for (double v : cls.per_class_recall) rpc.push_back(encode_double(v));
  for (double v : cls.per_class_f1) fpc.push_back(encode_double(v));
  j["per_class_precision"] = ppc;
  j["per_class_recall"] = rpc;
  j["per_class_f1"] = fpc;
  Json rows = Json::array();
  for (size_t t = 0; t < confusion.num_classes; ++t) {
    Json row = Json::array();
    for (size_t p = 0; p < confusion.num_classes; ++p)
      row.push_back(confusion.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("metrics json: parse error: ") + e.what());
  }
  MetricsReport r;
  r.cls.accuracy = decode_double(j.at("accuracy"), "accuracy");
  r.cls.precision = decode_double(j.at("precision"), "precision");
  r.cls.recall = decode_double(j.at("recall"), "recall");
  r.cls.f1 = decode_double(j.at("f1"), "f1");
  r.mcc = decode_double(j.at("mcc"), "mcc");
  for (const auto& v : j.at("per_class_fdr"))
    r.fdr.per_class_log.push_back(decode_double(v, "per_class_fdr"));
  r.fdr.overall_log = decode_double(j.at("overall_fdr"), "overall_fdr");
  if (j.contains("per_class_precision"))
    for (const auto& v : j["per_class_precision"])
      r.cls.per_class_precision.push_back(decode_double(v, "per_class_precision"));
  if (j.contains("per_class_recall"))
    for (const auto& v : j["per_class_recall"])
      r.cls.per_class_recall.push_back(decode_double(v, "per_class_recall"));
  if (j.contains("per_class_f1"))
    for (const auto& v : j["per_class_f1"])
      r.cls.per_class_f1.push_back(decode_double(v, "per_class_f1"));
  const auto& rows = j.at("confusion");
  r.confusion.num_classes = rows.size();
  r.confusion.counts.assign(r.confusion.num_classes * r.confusion.num_classes,
                            0);
  for (size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != r.confusion.num_classes)
      throw ConfigError("metrics json: confusion matrix is not square");
    for (size_t p = 0; p < rows[t].size(); ++p)
      r.confusion.at(t, p) = rows[t][p].get<int64_t>();
  }
  return r;
}

void MetricsReport::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << to_json();
  if (!out) throw ConfigError("write failed: " + path);
}

MetricsReport MetricsReport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::vector<std::string>& class_names,
                         const std::string& path) {
  if (class_names.size() != cm.num_classes)
    throw ConfigError("confusion csv: class name count mismatch");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "true\\pred";
  for (const auto& n : class_names) out << ',' << n;
  out << "\n";
  for (size_t t = 0; t < cm.num_classes; ++t) {
    out << class_names[t];
    for (size_t p = 0; p < cm.num_classes; ++p) out << ',' << cm.at(t, p);
    out << "\n";
  }
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace sonar::metrics
