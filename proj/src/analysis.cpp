#include "smnas/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace smnas {

FactorVector extract_factors(const EvalRecord& record) {
  if (!record.is_modular())
    throw std::invalid_argument("factor extraction needs a modular record");
  if (record.status != RecordStatus::ok)
    throw std::invalid_argument("factor extraction needs an ok record");
  const auto& enc = std::get<ModularCandidate>(record.payload).encoding;

  FactorVector f;
  f.depth = enc.depth();
  f.width = enc.base;
  int index = 0;
  int n_doublings = 0;
  for (std::size_t s = 0; s < enc.stages.size(); ++s) {
    for (std::uint8_t code : enc.stages[s]) {
      ++index;
      if (code == 2 && n_doublings < 4)
        f.dc[static_cast<std::size_t>(n_doublings++)] = static_cast<double>(index) / f.depth;
    }
    f.len[s] = static_cast<double>(enc.stages[s].size()) / f.depth;
  }
  f.accuracy = record.objective.accuracy;
  f.flops = record.objective.cost;
  return f;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<std::optional<double>> factor_column(const std::vector<FactorVector>& records,
                                                 std::size_t which) {
  std::vector<std::optional<double>> col;
  col.reserve(records.size());
  for (const FactorVector& f : records) {
    if (which == 0) col.push_back(static_cast<double>(f.depth));
    else if (which == 1) col.push_back(static_cast<double>(f.width));
    else if (which < 6) col.push_back(f.dc[which - 2]);
    else if (which < 10) col.push_back(f.len[which - 6]);
    else if (which == 10) col.push_back(f.flops);
    else col.push_back(f.accuracy);
  }
  return col;
}

}  // namespace

CorrelationMatrix correlation_matrix(const std::vector<FactorVector>& records) {
  if (records.size() < 3)
    throw std::invalid_argument("correlation needs at least 3 records");
  CorrelationMatrix m;
  m.names = {"depth", "width", "DC_1",  "DC_2",  "DC_3",  "DC_4",
             "len_2", "len_3", "len_4", "len_5", "flops", "accuracy"};
  const std::size_t k = m.names.size();
  std::vector<std::vector<std::optional<double>>> cols;
  cols.reserve(k);
  for (std::size_t i = 0; i < k; ++i) cols.push_back(factor_column(records, i));

  m.r.assign(k, std::vector<double>(k, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      // pairwise-complete rows
      std::vector<double> xs, ys;
      for (std::size_t n = 0; n < records.size(); ++n) {
        if (cols[i][n] && cols[j][n]) {
          xs.push_back(*cols[i][n]);
          ys.push_back(*cols[j][n]);
        }
      }
      double r = std::numeric_limits<double>::quiet_NaN();
      if (xs.size() >= 3) {
        if (i == j) {
          // 1 on the diagonal unless the factor has no variance
          r = std::isnan(pearson(xs, xs)) ? r : 1.0;
        } else {
          r = pearson(xs, ys);
        }
      }
      m.r[i][j] = m.r[j][i] = r;
    }
  }
  return m;
}

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// RFC 4180 quoting
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string record_spec(const EvalRecord& r) {
  if (r.is_modular())
    return format_backbone_encoding(std::get<ModularCandidate>(r.payload).encoding);
  return config_identity(std::get<StructuralConfig>(r.payload));
}

std::vector<std::pair<const EvalRecord*, std::size_t>> ranked_rows(const ParetoArchive& archive) {
  std::vector<const EvalRecord*> records = archive.all();
  std::vector<EvalRecord> copy;
  copy.reserve(records.size());
  for (const EvalRecord* r : records) copy.push_back(*r);
  const auto fronts = nondominated_sort(copy);
  std::vector<std::size_t> rank(records.size(), 0);
  for (std::size_t f = 0; f < fronts.size(); ++f)
    for (std::size_t idx : fronts[f]) rank[idx] = f;
  std::vector<std::pair<const EvalRecord*, std::size_t>> rows;
  rows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) rows.emplace_back(records[i], rank[i]);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.first->objective.cost != b.first->objective.cost)
      return a.first->objective.cost < b.first->objective.cost;
    return a.first->id < b.first->id;
  });
  return rows;
}

}  // namespace

std::string correlation_csv(const CorrelationMatrix& m) {
  std::string out = "factor";
  for (const std::string& n : m.names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    out += m.names[i];
    for (std::size_t j = 0; j < m.names.size(); ++j) out += "," + format_double(m.r[i][j]);
    out += "\n";
  }
  return out;
}

std::string export_front_csv(const ParetoArchive& archive) {
  std::string out = "id,spec,cost,accuracy,rank\n";
  for (const auto& [r, rank] : ranked_rows(archive)) {
    out += csv_field(r->id) + "," + csv_field(record_spec(*r)) + "," +
           format_double(r->objective.cost) + "," + format_double(r->objective.accuracy) + "," +
           std::to_string(rank) + "\n";
  }
  return out;
}

json export_front_json(const ParetoArchive& archive) {
  json rows = json::array();
  for (const auto& [r, rank] : ranked_rows(archive)) {
    rows.push_back(json{{"id", r->id},
                        {"spec", record_spec(*r)},
                        {"cost", r->objective.cost},
                        {"accuracy", r->objective.accuracy},
                        {"rank", rank}});
  }
  return rows;
}

}  // namespace smnas
