#include "relsal/harness/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "relsal/error.hpp"

namespace relsal::harness {
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

Json number(double v) {
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

Json summary_json(const DetectionSummary& s) {
  return Json{{"auc", number(s.auc)},
              {"max_f", number(s.max_f)},
              {"med_f", number(s.med_f)},
              {"avg_f", number(s.avg_f)},
              {"mae", number(s.mae)}};
}

Json choice_json(const SliceChoice& c) {
  return Json{{"slice", c.slice}, {"value", number(c.value)}};
}

Json slice_json(const SliceReport& r) {
  return Json{{"slice", r.slice},         {"auc", number(r.auc)},
              {"max_f", number(r.max_f)}, {"med_f", number(r.med_f)},
              {"avg_f", number(r.avg_f)}, {"mae", number(r.mae)}};
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) { out_ << "scope,subject,slice,metric,value\n"; }

  void row(std::string_view scope, std::string_view subject, int slice, std::string_view metric,
           double value) {
    out_ << scope << ',' << subject << ',';
    if (slice > 0) {
      out_ << slice;
    }
    out_ << ',' << metric << ',' << format_number(value) << '\n';
  }

 private:
  std::ostream& out_;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace

ReportFormat report_format_from_name(std::string_view name) {
  if (name == "csv") {
    return ReportFormat::kCsv;
  }
  if (name == "json") {
    return ReportFormat::kJson;
  }
  throw RangeError("unknown report format '" + std::string(name) + "' (expected csv or json)");
}

std::string format_number(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_report_json(std::ostream& out, const RunReport& report) {
  Json doc;
  doc["tool_version"] = report.tool_version;
  doc["config"] = Json{{"beta2", report.config.beta2},
                       {"thresholds", report.config.thresholds},
                       {"ap_method", ap_method_name(report.config.ap_method)},
                       {"scheme", report.config.scheme}};
  if (report.detection) {
    const auto& d = *report.detection;
    Json per_slice = Json::array();
    for (const auto& m : d.per_slice) {
      per_slice.push_back(Json{{"slice", m.slice},       {"n_images", m.n_images},
                               {"auc", number(m.auc)},     {"max_f", number(m.max_f)},
                               {"med_f", number(m.med_f)}, {"avg_f", number(m.avg_f)},
                               {"mae", number(m.mae)}});
    }
    doc["detection"] = Json{{"n_images", d.n_images},
                            {"per_image_best", summary_json(d.per_image_best)},
                            {"global_best_auc", choice_json(d.global_best_auc)},
                            {"global_best_maxf", choice_json(d.global_best_maxf)},
                            {"global_min_mae", choice_json(d.global_min_mae)},
                            {"global_best", summary_json(d.global_best)},
                            {"per_slice", per_slice}};
  } else {
    doc["detection"] = nullptr;
  }
  if (report.sor) {
    doc["sor"] = Json{{"mean_sor", number(report.sor->mean_sor)},
                      {"n_valid", report.sor->n_valid},
                      {"n_excluded", report.sor->n_excluded}};
  } else {
    doc["sor"] = nullptr;
  }
  if (report.subitizing) {
    const auto& s = *report.subitizing;
    Json classes = Json::array();
    for (const auto& c : s.per_class) {
      classes.push_back(Json{{"label", c.label}, {"ap", number(c.ap)}, {"count", c.count}});
    }
    doc["subitizing"] = Json{{"per_class", classes},
                             {"mean_ap", number(s.mean_ap)},
                             {"weighted_ap", number(s.weighted_ap)},
                             {"skipped_classes", s.skipped_classes}};
  }
  Json images = Json::array();
  for (const auto& row : report.images) {
    Json img{{"id", row.id},
             {"n_instances", row.sor.n_instances},
             {"sor_valid", row.sor.valid},
             {"rho", number(row.sor.rho)},
             {"sor", number(row.sor.sor)}};
    if (row.detection) {
      Json slices = Json::array();
      for (const auto& r : row.detection->per_slice) {
        slices.push_back(slice_json(r));
      }
      img["detection"] = Json{{"best_auc", choice_json(row.detection->best_auc)},
                              {"best_maxf", choice_json(row.detection->best_maxf)},
                              {"min_mae", choice_json(row.detection->min_mae)},
                              {"per_slice", slices},
                              {"degenerate_slices", row.detection->degenerate_slices}};
    } else {
      img["detection"] = nullptr;
    }
    images.push_back(std::move(img));
  }
  doc["images"] = std::move(images);
  out << doc.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const RunReport& report) {
  CsvWriter csv(out);
  for (const auto& row : report.images) {
    csv.row("image", row.id, 0, "n_instances", static_cast<double>(row.sor.n_instances));
    csv.row("image", row.id, 0, "rho", row.sor.rho);
    csv.row("image", row.id, 0, "sor", row.sor.sor);
    if (!row.detection) {
      continue;
    }
    const auto& d = *row.detection;
    for (const auto& r : d.per_slice) {
      csv.row("image", row.id, r.slice, "auc", r.auc);
      csv.row("image", row.id, r.slice, "max_f", r.max_f);
      csv.row("image", row.id, r.slice, "med_f", r.med_f);
      csv.row("image", row.id, r.slice, "avg_f", r.avg_f);
      csv.row("image", row.id, r.slice, "mae", r.mae);
    }
    csv.row("image", row.id, d.best_auc.slice, "best_auc", d.best_auc.value);
    csv.row("image", row.id, d.best_maxf.slice, "best_max_f", d.best_maxf.value);
    csv.row("image", row.id, d.min_mae.slice, "min_mae", d.min_mae.value);
  }
  if (report.detection) {
    const auto& d = *report.detection;
    for (const auto& m : d.per_slice) {
      csv.row("slice_mean", "", m.slice, "n_images", static_cast<double>(m.n_images));
      csv.row("slice_mean", "", m.slice, "auc", m.auc);
      csv.row("slice_mean", "", m.slice, "max_f", m.max_f);
      csv.row("slice_mean", "", m.slice, "med_f", m.med_f);
      csv.row("slice_mean", "", m.slice, "avg_f", m.avg_f);
      csv.row("slice_mean", "", m.slice, "mae", m.mae);
    }
    const auto& b = d.per_image_best;
    csv.row("dataset", "per_image_best", 0, "auc", b.auc);
    csv.row("dataset", "per_image_best", 0, "max_f", b.max_f);
    csv.row("dataset", "per_image_best", 0, "med_f", b.med_f);
    csv.row("dataset", "per_image_best", 0, "avg_f", b.avg_f);
    csv.row("dataset", "per_image_best", 0, "mae", b.mae);
    csv.row("dataset", "global_best", d.global_best_auc.slice, "auc", d.global_best.auc);
    csv.row("dataset", "global_best", d.global_best_maxf.slice, "max_f", d.global_best.max_f);
    csv.row("dataset", "global_best", d.global_best_maxf.slice, "med_f", d.global_best.med_f);
    csv.row("dataset", "global_best", d.global_best_maxf.slice, "avg_f", d.global_best.avg_f);
    csv.row("dataset", "global_best", d.global_min_mae.slice, "mae", d.global_best.mae);
  }
  if (report.sor) {
    csv.row("dataset", "sor", 0, "mean_sor", report.sor->mean_sor);
    csv.row("dataset", "sor", 0, "n_valid", static_cast<double>(report.sor->n_valid));
    csv.row("dataset", "sor", 0, "n_excluded", static_cast<double>(report.sor->n_excluded));
  }
  if (report.subitizing) {
    for (const auto& c : report.subitizing->per_class) {
      csv.row("subitizing", c.label, 0, "ap", c.ap);
      csv.row("subitizing", c.label, 0, "count", static_cast<double>(c.count));
    }
    csv.row("subitizing", "all", 0, "mean_ap", report.subitizing->mean_ap);
    csv.row("subitizing", "all", 0, "weighted_ap", report.subitizing->weighted_ap);
  }
}

void write_report(const fs::path& path, const RunReport& report, ReportFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write report " + path.string());
  }
  if (format == ReportFormat::kJson) {
    write_report_json(out, report);
  } else {
    write_report_csv(out, report);
  }
  if (!out) {
    throw IoError("failed writing report " + path.string());
  }
}

void print_summary(std::ostream& out, const RunReport& report) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::fixed << std::setprecision(4);
  if (!report.images.empty()) {
    out << "images " << report.images.size() << '\n';
  }
  if (report.detection) {
    const auto& d = *report.detection;
    const auto& b = d.per_image_best;
    out << "per-image best  AUC " << b.auc << "  maxF " << b.max_f << "  medF " << b.med_f
        << "  avgF " << b.avg_f << "  MAE " << b.mae << '\n';
    out << "global best     AUC " << d.global_best.auc << " (slice " << d.global_best_auc.slice
        << ")  maxF " << d.global_best.max_f << " (slice " << d.global_best_maxf.slice
        << ")  MAE " << d.global_best.mae << " (slice " << d.global_min_mae.slice << ")\n";
    out << "mean slice AUC  " << mean_slice_auc(d) << '\n';
  } else if (!report.images.empty()) {
    out << "detection: no non-degenerate slice\n";
  }
  if (report.sor) {
    out << "SOR " << report.sor->mean_sor << "  (valid " << report.sor->n_valid << ", excluded "
        << report.sor->n_excluded << ")\n";
  } else if (!report.images.empty()) {
    out << "SOR undefined for every image\n";
  }
  if (report.subitizing) {
    for (const auto& c : report.subitizing->per_class) {
      out << "AP[" << c.label << "] " << c.ap << "  (n " << c.count << ")\n";
    }
    out << "mean AP " << report.subitizing->mean_ap << "  weighted AP "
        << report.subitizing->weighted_ap << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

std::vector<SubitizingPrediction> load_subitizing_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open subitizing predictions " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError(path.string() + ": empty file");
  }
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "image_id") {
    throw IoError(path.string() + ": header must start with image_id");
  }
  std::vector<SubitizingPrediction> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(header.size()) + " columns");
    }
    SubitizingPrediction p;
    p.image_id = cells[0];
    for (std::size_t i = 1; i < cells.size(); ++i) {
      double v = 0.0;
      const auto* end = cells[i].data() + cells[i].size();
      const auto res = std::from_chars(cells[i].data(), end, v);
      if (res.ec != std::errc() || res.ptr != end) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                      cells[i] + "'");
      }
      p.confidences.push_back(v);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_subitizing_predictions(const fs::path& path,
                                  const std::vector<SubitizingPrediction>& predictions,
                                  const std::vector<std::string>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << "image_id";
  for (const auto& l : labels) {
    out << ',' << l;
  }
  out << '\n';
  for (const auto& p : predictions) {
    if (p.confidences.size() != labels.size()) {
      throw ShapeError("prediction for " + p.image_id + " has the wrong number of classes");
    }
    out << p.image_id;
    for (const double c : p.confidences) {
      out << ',' << format_number(c);
    }
    out << '\n';
  }
}

void write_training_log(std::ostream& out, const net::TrainLog& log) {
  const std::size_t stages = log.epochs.empty() ? 0 : log.epochs.front().aux.size();
  out << "epoch,master";
  for (std::size_t s = 1; s <= stages; ++s) {
    out << ",aux_" << s;
  }
  out << ",total\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << format_number(e.master);
    for (const double a : e.aux) {
      out << ',' << format_number(a);
    }
    out << ',' << format_number(e.total) << '\n';
  }
}

}  // namespace relsal::harness
