#pragma once
// CSV serialization of run reports and cross-seed aggregation.
//
//   eval CSV     seed,strategy,loop,batches,train_loss,eval_acc
//   summary CSV  "# key=value" provenance lines, then seed,strategy,b2a,final_acc
//   aggregate    strategy,runs,b2a_reached,b2a_median,b2a_iqr,
//                final_acc_median,final_acc_iqr
//
// Unreached B2A counts as +inf when taking medians.
//
// Numbers are printed with fixed precision so identical runs give identical
// bytes.

#include "vecaf/orchestrator.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vecaf::report {

using Provenance = std::map<std::string, std::string>;

std::string format_number(double v);
std::string format_b2a(const orchestrator::RunReport& r);  // count, "not reached" or "n/a"

std::string eval_csv(const std::vector<orchestrator::RunReport>& runs);
std::string summary_csv(const std::vector<orchestrator::RunReport>& runs,
                        const Provenance& provenance);

// index,x,y,selected_<strategy>... with x,y the top-2 principal components.
std::string projection_csv(const EmbeddingSet& pool,
                            const std::vector<orchestrator::RunReport>& runs);

void write_text(const std::string& text, const std::filesystem::path& path);

// Linear-interpolation quantile (q in [0,1]) of a nonempty sample.
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

struct SummaryRow {
  std::uint64_t seed = 0;
  std::string strategy;
  std::optional<double> b2a;  // empty when not reached or not measured
  bool b2a_measured = false;
  double final_accuracy = 0.0;
};

struct SummaryFile {
  Provenance provenance;
  std::vector<SummaryRow> rows;
};

SummaryFile parse_summary(const std::string& text, const std::string& context = "");

// Throws ConfigError naming every provenance key that differs across files.
std::string aggregate(const std::vector<SummaryFile>& files);

}  // namespace vecaf::report
