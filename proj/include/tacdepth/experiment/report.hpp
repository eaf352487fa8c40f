#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/metrics/metrics.hpp"

namespace tacdepth::experiment {

struct ReportRow {
  std::string run, protocol, model, dataset;
  metrics::MetricReport report;
};

struct Report {
  std::vector<ReportRow> cells;   // one per metric row of every run
  std::vector<ReportRow> models;  // one per (run, model), pixel-aggregated over its cells
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> error_maps;
  bool complete() const { return warnings.empty(); }
};

inline std::string format_table(const std::vector<ReportRow>& rows, bool with_dataset) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %-16s %-18s %9s %9s %9s %9s %9s\n", "run", "model",
                with_dataset ? "dataset" : "", "Abs.Rel", "RMSE", "RMSElog", "SILog", "d<1.05");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-24s %-16s %-18s %9.4f %9.5f %9.4f %9.5f %9.4f\n", r.run.c_str(),
                  r.model.c_str(), with_dataset ? r.dataset.c_str() : "", r.report.abs_rel, r.report.rmse,
                  r.report.rmse_log, r.report.silog, r.report.delta[0]);
    os << buf;
  }
  return os.str();
}

/// Collects metrics.json from each run directory. Missing or unreadable
/// runs become warnings; the remaining runs still produce tables.
inline Report build_report(const std::vector<std::filesystem::path>& run_dirs, const metrics::MetricOptions& opt) {
  Report rep;
  for (const auto& dir : run_dirs) {
    const auto file = dir / "metrics.json";
    const std::string run = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    if (!std::filesystem::exists(file)) {
      rep.warnings.push_back("missing run: " + dir.string() + " (no metrics.json)");
      continue;
    }
    try {
      const json doc = read_json(file);
      const std::string protocol = doc.at("protocol").get<std::string>();
      std::map<std::string, metrics::MetricSums> per_model;
      std::vector<std::string> model_order;
      for (const auto& row : doc.at("rows")) {
        const auto sums = metrics::sums_from_json(row);
        const std::string model = row.at("model").get<std::string>();
        rep.cells.push_back({run, protocol, model, row.at("dataset").get<std::string>(), metrics::finalize(sums, opt)});
        if (!per_model.count(model)) model_order.push_back(model);
        per_model[model] += sums;
      }
      for (const auto& m : model_order) rep.models.push_back({run, protocol, m, "all", metrics::finalize(per_model[m], opt)});
    } catch (const json::exception& e) {
      rep.warnings.push_back("unreadable run: " + file.string() + ": " + e.what());
    } catch (const Error& e) {
      rep.warnings.push_back("unreadable run: " + file.string() + ": " + e.what());
    }
    if (std::filesystem::is_directory(dir / "error_maps"))
      for (const auto& f : std::filesystem::directory_iterator(dir / "error_maps")) rep.error_maps.push_back(f.path());
  }
  return rep;
}

/// Writes tables.csv, tables.txt, report.json and copies of the error maps.
inline void write_report(const Report& rep, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  {
    std::ofstream csv(out / "tables.csv");
    csv << "run,protocol," << metrics::kCsvHeader << '\n';
    for (const auto& r : rep.models) csv << r.run << ',' << r.protocol << ',' << metrics::csv_row(r.report, r.dataset, r.model) << '\n';
    for (const auto& r : rep.cells) csv << r.run << ',' << r.protocol << ',' << metrics::csv_row(r.report, r.dataset, r.model) << '\n';
    if (!csv) throw IoError(FormatIssue::kOpenFailed, (out / "tables.csv").string());
  }
  {
    std::ofstream txt(out / "tables.txt");
    txt << "Per model (pixel-aggregated over its evaluation cells)\n\n" << format_table(rep.models, false) << '\n';
    txt << "Per evaluation cell\n\n" << format_table(rep.cells, true);
    if (!rep.warnings.empty()) {
      txt << "\nWarnings\n\n";
      for (const auto& w : rep.warnings) txt << "  " << w << '\n';
    }
  }
  json maps = json::array();
  if (!rep.error_maps.empty()) {
    std::filesystem::create_directories(out / "error_maps");
    for (const auto& f : rep.error_maps) {
      const auto dest = out / "error_maps" / (f.parent_path().parent_path().filename().string() + "." + f.filename().string());
      std::filesystem::copy_file(f, dest, std::filesystem::copy_options::overwrite_existing);
      maps.push_back(std::filesystem::relative(dest, out).string());
    }
  }
  write_json(json{{"complete", rep.complete()},
                  {"warnings", rep.warnings},
                  {"models", rep.models.size()},
                  {"cells", rep.cells.size()},
                  {"error_maps", maps}},
             out / "report.json");
}

}  // namespace tacdepth::experiment
