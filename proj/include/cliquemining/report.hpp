#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cliquemining/embedder.hpp"
#include "cliquemining/retrieval.hpp"

namespace cliquemining {

// CSV renderers. Doubles use the shortest round-trip representation, so equal
// reports give equal bytes.
std::string recall_csv(const RecallReport& report);     // mode,threshold,k,recall,num_queries
std::string gds_csv(const GdsProfile& profile);         // bin_lo,bin_hi,count,mean,std
std::string ordering_csv(const OrderingEstimate& est);  // estimate,stderr,trials
std::string trace_csv(const std::vector<TraceRow>& trace);  // step,loss,selected_pos,selected_neg

/// Recall against threshold, one polyline per k.
std::string recall_curve_svg(const RecallReport& report, const std::string& title);

struct GdsSeries {
  std::string name;
  GdsProfile profile;
};
/// Mean line and a +-1 std band per series over the finite bins.
std::string gds_svg(const std::vector<GdsSeries>& series, const std::string& title);

struct NamedRecall {
  std::string name;
  RecallReport report;
};
struct NamedOrdering {
  std::string name;
  OrderingEstimate estimate;
};

struct ReportSet {
  std::vector<NamedRecall> recalls;  // a report with several thresholds also gets a curve plot
  std::vector<GdsSeries> gds;
  std::vector<NamedOrdering> orderings;
};

/// Writes <name>.csv for every report, <name>.svg for every multi-threshold
/// recall report and gds.svg when profiles are present. Returns the paths
/// written, in order.
std::vector<std::filesystem::path> emit_reports(const ReportSet& reports, const std::filesystem::path& out_dir);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cliquemining
