#include "mocorank/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mocorank {

std::size_t MetricsReport::total() const {
  std::size_t n = 0;
  for (const auto& row : confusion) {
    for (auto v : row) n += v;
  }
  return n;
}

Confusion confusion_matrix(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw Error("confusion_matrix: predictions and labels differ in length");
  }
  Confusion m{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= kNumLevels || labels[i] < 0 || labels[i] >= kNumLevels) {
      throw Error("confusion_matrix: label out of range at index " + std::to_string(i));
    }
    ++m[labels[i]][preds[i]];
  }
  return m;
}

Confusion confusion_matrix(std::span<const Level> preds, std::span<const Level> labels) {
  std::vector<int> p, l;
  for (auto v : preds) p.push_back(code(v));
  for (auto v : labels) l.push_back(code(v));
  return confusion_matrix(std::span<const int>(p), std::span<const int>(l));
}

MetricsReport accuracy_metrics(const Confusion& confusion) {
  MetricsReport r;
  r.confusion = confusion;
  const std::size_t total = r.total();
  if (total == 0) throw Error("accuracy_metrics: empty confusion matrix");
  std::size_t diag = 0;
  double recall_sum = 0.0;
  int populated = 0;
  for (int c = 0; c < kNumLevels; ++c) {
    diag += confusion[c][c];
    std::size_t row = 0;
    for (auto v : confusion[c]) row += v;
    r.present[c] = row > 0;
    r.recall[c] = row > 0 ? static_cast<double>(confusion[c][c]) / static_cast<double>(row) : 0.0;
    if (row > 0) {
      recall_sum += r.recall[c];
      ++populated;
    }
  }
  r.acc = static_cast<double>(diag) / static_cast<double>(total);
  r.avg_acc = recall_sum / populated;
  return r;
}

std::string metrics_json(const MetricsReport& r, int indent) {
  nlohmann::ordered_json j;
  j["acc"] = r.acc;
  j["avg_acc"] = r.avg_acc;
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  nlohmann::ordered_json excluded = nlohmann::ordered_json::array();
  for (int c = 0; c < kNumLevels; ++c) {
    const char* name = level_name(static_cast<Level>(c));
    recall[name] = r.present[c] ? nlohmann::ordered_json(r.recall[c]) : nlohmann::ordered_json();
    if (!r.present[c]) excluded.push_back(name);
  }
  j["recall"] = recall;
  j["avg_acc_excluded_classes"] = excluded;
  nlohmann::ordered_json conf = nlohmann::ordered_json::array();
  for (const auto& row : r.confusion) conf.push_back(row);
  j["confusion"] = conf;
  j["total"] = r.total();
  return j.dump(indent);
}

MetricsReport metrics_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Confusion m{};
  const auto& conf = j.at("confusion");
  if (conf.size() != kNumLevels) throw Error("metrics JSON: confusion must be 4x4");
  for (int a = 0; a < kNumLevels; ++a) {
    if (conf[a].size() != kNumLevels) throw Error("metrics JSON: confusion must be 4x4");
    for (int b = 0; b < kNumLevels; ++b) m[a][b] = conf[a][b].get<std::size_t>();
  }
  return accuracy_metrics(m);
}

std::string recall_csv(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "class,recall,support\n";
  for (int c = 0; c < kNumLevels; ++c) {
    std::size_t support = 0;
    for (auto v : r.confusion[c]) support += v;
    os << level_name(static_cast<Level>(c)) << ',';
    if (r.present[c]) os << r.recall[c];
    os << ',' << support << '\n';
  }
  return os.str();
}

RatingMatrix RatingMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  RatingMatrix m;
  m.subjects = rows.size();
  m.raters = rows.empty() ? 0 : rows[0].size();
  for (const auto& row : rows) {
    if (row.size() != m.raters) throw Error("rating matrix rows differ in length");
    m.ratings.insert(m.ratings.end(), row.begin(), row.end());
  }
  return m;
}

double icc_2_1(const RatingMatrix& m) {
  const std::size_t n = m.subjects;
  const std::size_t k = m.raters;
  if (n < 2 || k < 2) throw Error("ICC(2,1) needs at least 2 subjects and 2 raters");
  if (m.ratings.size() != n * k) throw Error("rating matrix has missing cells");
  if (!all_finite(m.ratings)) throw Error("rating matrix has non-finite cells");

  double grand = 0.0;
  for (double v : m.ratings) grand += v;
  grand /= static_cast<double>(n * k);
  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      row_mean[i] += m(i, j);
      col_mean[j] += m(i, j);
    }
  }
  for (auto& v : row_mean) v /= static_cast<double>(k);
  for (auto& v : col_mean) v /= static_cast<double>(n);

  double ss_total = 0.0, ss_rows = 0.0, ss_cols = 0.0;
  for (double v : m.ratings) ss_total += (v - grand) * (v - grand);
  for (double v : row_mean) ss_rows += (v - grand) * (v - grand);
  for (double v : col_mean) ss_cols += (v - grand) * (v - grand);
  ss_rows *= static_cast<double>(k);
  ss_cols *= static_cast<double>(n);
  if (ss_total == 0.0) return 1.0;
  double ss_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double r = m(i, j) - row_mean[i] - col_mean[j] + grand;
      ss_err += r * r;
    }
  }

  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  const double ms_rows = ss_rows / (nd - 1.0);
  const double ms_cols = ss_cols / (kd - 1.0);
  const double ms_err = ss_err / ((nd - 1.0) * (kd - 1.0));
  const double denom = ms_rows + (kd - 1.0) * ms_err + kd * (ms_cols - ms_err) / nd;
  if (denom <= 0.0) throw Error("degenerate variance");
  return (ms_rows - ms_err) / denom;
}

RatingMatrix parse_ratings(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    for (auto& ch : line) {
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    }
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error("ratings line " + std::to_string(line_no) + ": not a number: '" + tok + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  try {
    return RatingMatrix::from_rows(rows);
  } catch (const Error& e) {
    throw Error(std::string("ratings: ") + e.what());
  }
}

RatingMatrix load_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ratings file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ratings(buf.str());
}

}  // namespace mocorank
