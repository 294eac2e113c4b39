#include "vecaf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace vecaf::report {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_b2a(const orchestrator::RunReport& r) {
  if (!r.target_accuracy) return "n/a";
  if (!r.b2a) return "not reached";
  return std::to_string(*r.b2a);
}

std::string eval_csv(const std::vector<orchestrator::RunReport>& runs) {
  std::ostringstream out;
  out << "seed,strategy,loop,batches,train_loss,eval_acc\n";
  for (const auto& r : runs)
    for (const auto& p : r.eval_points)
      out << r.seed << ',' << orchestrator::to_string(r.strategy) << ',' << p.loop << ','
          << p.batches << ',' << format_number(p.train_loss) << ','
          << format_number(p.eval_accuracy) << '\n';
  return out.str();
}

std::string summary_csv(const std::vector<orchestrator::RunReport>& runs,
                        const Provenance& provenance) {
  std::ostringstream out;
  for (const auto& [k, v] : provenance) out << "# " << k << '=' << v << '\n';
  out << "seed,strategy,b2a,final_acc\n";
  for (const auto& r : runs)
    out << r.seed << ',' << orchestrator::to_string(r.strategy) << ',' << format_b2a(r) << ','
        << format_number(r.final_accuracy) << '\n';
  return out.str();
}

std::string projection_csv(const EmbeddingSet& pool,
                           const std::vector<orchestrator::RunReport>& runs) {
  const Matrix& x = pool.vectors();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  const Eigen::Index d = cov.rows();
  Matrix basis(d, 2);
  basis.col(0) = solver.eigenvectors().col(d - 1);
  basis.col(1) = d > 1 ? Vector(solver.eigenvectors().col(d - 2)) : Vector::Zero(d);
  // Fix the sign so the largest-magnitude loading is positive.
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0) basis.col(c) *= -1.0;
  }
  const Matrix proj = centered * basis;

  std::vector<std::vector<bool>> flags;
  std::ostringstream out;
  out << "index,x,y";
  for (const auto& r : runs) {
    out << ",selected_" << orchestrator::to_string(r.strategy) << "_s" << r.seed;
    std::vector<bool> f(pool.count(), false);
    for (const auto& loop : r.loops)
      for (Index i : loop.selected) f[i] = true;
    flags.push_back(std::move(f));
  }
  out << '\n';
  for (Index i = 0; i < pool.count(); ++i) {
    out << i << ',' << format_number(proj(i, 0)) << ',' << format_number(proj(i, 1));
    for (const auto& f : flags) out << ',' << (f[i] ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failure on " + path.string());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi || values[lo] == values[hi]) return values[lo];
  if (std::isinf(values[hi])) return values[hi];
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

SummaryFile parse_summary(const std::string& text, const std::string& context) {
  const std::string ctx = context.empty() ? "" : context + ": ";
  SummaryFile file;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      file.provenance[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header_seen) {
      if (line != "seed,strategy,b2a,final_acc")
        throw FormatError(ctx + "unexpected summary header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw FormatError(ctx + "summary row needs 4 cells: '" + line + "'");
    SummaryRow row;
    try {
      row.seed = std::stoull(cells[0]);
      row.strategy = cells[1];
      if (cells[2] != "n/a") {
        row.b2a_measured = true;
        if (cells[2] != "not reached") row.b2a = std::stod(cells[2]);
      }
      row.final_accuracy = std::stod(cells[3]);
    } catch (const std::invalid_argument&) {
      throw FormatError(ctx + "bad number in summary row '" + line + "'");
    }
    file.rows.push_back(row);
  }
  if (!header_seen) throw FormatError(ctx + "missing summary header");
  return file;
}

std::string aggregate(const std::vector<SummaryFile>& files) {
  if (files.empty()) throw ConfigError("aggregate: no summary files");
  std::set<std::string> keys;
  for (const auto& f : files)
    for (const auto& [k, v] : f.provenance) keys.insert(k);
  std::vector<std::string> mismatched;
  for (const auto& k : keys) {
    std::set<std::string> seen;
    for (const auto& f : files) {
      auto it = f.provenance.find(k);
      seen.insert(it == f.provenance.end() ? std::string("<missing>") : it->second);
    }
    if (seen.size() > 1) mismatched.push_back(k);
  }
  if (!mismatched.empty()) {
    std::string msg = "incompatible summaries, mismatched keys:";
    for (const auto& k : mismatched) msg += " " + k;
    throw ConfigError(msg);
  }

  std::vector<std::string> order;
  std::map<std::string, std::vector<SummaryRow>> by_strategy;
  for (const auto& f : files) {
    for (const auto& r : f.rows) {
      if (!by_strategy.count(r.strategy)) order.push_back(r.strategy);
      by_strategy[r.strategy].push_back(r);
    }
  }

  std::ostringstream out;
  out << "strategy,runs,b2a_reached,b2a_median,b2a_iqr,final_acc_median,final_acc_iqr\n";
  for (const auto& name : order) {
    const auto& rows = by_strategy[name];
    std::vector<double> acc;
    std::vector<double> b2a;
    Index reached = 0;
    bool measured = false;
    for (const auto& r : rows) {
      acc.push_back(r.final_accuracy);
      if (r.b2a_measured) {
        measured = true;
        b2a.push_back(r.b2a ? *r.b2a : std::numeric_limits<double>::infinity());
        if (r.b2a) ++reached;
      }
    }
    std::string b2a_median = "n/a";
    std::string b2a_iqr = "n/a";
    if (measured) {
      const double m = quantile(b2a, 0.5);
      const double spread = quantile(b2a, 0.75) - quantile(b2a, 0.25);
      b2a_median = std::isinf(m) ? "not reached" : format_number(m);
      b2a_iqr = std::isfinite(spread) ? format_number(spread) : "n/a";
    }
    const double acc_iqr = quantile(acc, 0.75) - quantile(acc, 0.25);
    out << name << ',' << rows.size() << ',' << (measured ? std::to_string(reached) : "n/a")
        << ',' << b2a_median << ',' << b2a_iqr << ',' << format_number(quantile(acc, 0.5)) << ','
        << format_number(acc_iqr) << '\n';
  }
  return out.str();
}

}  // namespace vecaf::report
