#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "lnlab/diagnostics.hpp"
#include "lnlab/model.hpp"
#include "lnlab/training.hpp"

namespace lnlab {

enum class ReportFormat { Csv, JsonLines };

std::string to_string(ReportFormat f);
/// Accepts csv|jsonl.
ReportFormat parse_format(const std::string& name);
/// ".csv" or ".jsonl".
std::string extension(ReportFormat f);

/// Empty cell (monostate) serializes as an empty CSV field / JSON null.
using Cell = std::variant<std::monostate, bool, std::int64_t, std::uint64_t, double, std::string>;

struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// %.17g, with nan / inf / -inf spelled out.
std::string format_number(double v);

/// Whole file contents in the given format. Rows must match the column count.
std::string render_report(const ReportTable& table, ReportFormat format);

/// Writes atomically-enough for a desk tool: renders first, then one write.
/// Throws Error naming the path when it cannot be opened.
void write_report(const ReportTable& table, ReportFormat format, const std::filesystem::path& path);

/// Reads back a table written by write_report. Every cell comes back as a
/// string (CSV) or as the JSON value's text (JSON lines); `columns` is the header.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Index of a column; throws Error when missing.
  std::size_t column(const std::string& name) const;
};
RawTable read_report(const std::filesystem::path& path, ReportFormat format);

struct BoundRow {
  BoundReport report;
  Placement placement = Placement::Peri;
  std::uint64_t seed = 0;
};

struct MomentRow {
  std::size_t layer = 0;
  Moments moments;
  std::uint64_t seed = 0;
  Placement placement = Placement::Peri;
  double delta_t = 1.0;
};

/// check,placement,D,delta_t,gamma_max,beta_max,lhs,rhs,margin,seed
ReportTable bounds_table(const std::vector<BoundRow>& rows);
/// layer,ma,var,frob,seed,placement,delta_t
ReportTable moments_table(const std::vector<MomentRow>& rows);
/// placement,weight_decay,seed,diverged,first_divergence_step,final_loss
ReportTable trials_table(const std::vector<TrialRecord>& rows);
/// instance,target,placement,rel_err
ReportTable gradcheck_table(const std::vector<GradcheckRow>& rows);

/// Serializes every file write of a run through one lock.
class ReportWriter {
 public:
  ReportWriter(std::filesystem::path dir, ReportFormat format);

  /// Writes `<dir>/<stem><ext>` and returns the path.
  std::filesystem::path write(const std::string& stem, const ReportTable& table);

  const std::filesystem::path& dir() const { return dir_; }
  ReportFormat format() const { return format_; }

 private:
  std::filesystem::path dir_;
  ReportFormat format_;
  std::mutex mutex_;
};

}  // namespace lnlab
