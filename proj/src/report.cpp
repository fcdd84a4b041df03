#include "lnlab/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lnlab/error.hpp"

namespace lnlab {

std::string to_string(ReportFormat f) { return f == ReportFormat::Csv ? "csv" : "jsonl"; }

ReportFormat parse_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "jsonl") return ReportFormat::JsonLines;
  throw DomainError("unknown format '" + name + "' (expected csv or jsonl)");
}

std::string extension(ReportFormat f) { return f == ReportFormat::Csv ? ".csv" : ".jsonl"; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string csv_field(const Cell& c) {
  struct V {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(std::uint64_t u) const { return std::to_string(u); }
    std::string operator()(double d) const { return format_number(d); }
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
      }
      return q + "\"";
    }
  };
  return std::visit(V{}, c);
}

std::string json_field(const Cell& c) {
  struct V {
    std::string operator()(std::monostate) const { return "null"; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(std::uint64_t u) const { return std::to_string(u); }
    std::string operator()(double d) const { return std::isfinite(d) ? format_number(d) : "null"; }
    std::string operator()(const std::string& s) const { return nlohmann::json(s).dump(); }
  };
  return std::visit(V{}, c);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string render_report(const ReportTable& table, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::Csv) {
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      out += (c ? "," : "") + table.columns[c];
    out += '\n';
  }
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw DimensionError("render_report: row has " + std::to_string(row.size()) +
                           " cells for " + std::to_string(table.columns.size()) + " columns");
    if (format == ReportFormat::Csv) {
      for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + csv_field(row[c]);
    } else {
      out += '{';
      for (std::size_t c = 0; c < row.size(); ++c)
        out += (c ? "," : "") + nlohmann::json(table.columns[c]).dump() + ":" + json_field(row[c]);
      out += '}';
    }
    out += '\n';
  }
  return out;
}

void write_report(const ReportTable& table, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = render_report(table, format);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw Error("write to '" + path.string() + "' failed");
}

std::size_t RawTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == name) return c;
  throw Error("report column '" + name + "' not found");
}

RawTable read_report(const std::filesystem::path& path, ReportFormat format) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  RawTable t;
  std::string line;
  if (format == ReportFormat::Csv) {
    if (!std::getline(f, line)) return t;
    t.columns = split_csv_line(line);
    while (std::getline(f, line))
      if (!line.empty()) t.rows.push_back(split_csv_line(line));
    return t;
  }
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto obj = nlohmann::ordered_json::parse(line);
    if (t.columns.empty())
      for (const auto& [k, v] : obj.items()) t.columns.push_back(k);
    std::vector<std::string> row;
    for (const auto& [k, v] : obj.items()) {
      if (v.is_string()) row.push_back(v.get<std::string>());
      else if (v.is_null()) row.push_back("");
      else if (v.is_number_float()) row.push_back(format_number(v.get<double>()));
      else row.push_back(v.dump());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable bounds_table(const std::vector<BoundRow>& rows) {
  ReportTable t{{"check", "placement", "D", "delta_t", "gamma_max", "beta_max", "lhs", "rhs",
                 "margin", "seed"},
                {}};
  for (const auto& r : rows) {
    const auto& b = r.report;
    t.rows.push_back({b.name, to_string(r.placement), std::uint64_t{b.context.depth},
                      b.context.delta_t, b.context.gamma_max, b.context.beta_max, b.lhs, b.rhs,
                      b.margin, r.seed});
  }
  return t;
}

ReportTable moments_table(const std::vector<MomentRow>& rows) {
  ReportTable t{{"layer", "ma", "var", "frob", "seed", "placement", "delta_t"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({std::uint64_t{r.layer}, r.moments.mean_abs, r.moments.var, r.moments.frob,
                      r.seed, to_string(r.placement), r.delta_t});
  return t;
}

ReportTable trials_table(const std::vector<TrialRecord>& rows) {
  ReportTable t{{"placement", "weight_decay", "seed", "diverged", "first_divergence_step",
                 "final_loss"},
                {}};
  for (const auto& r : rows) {
    Cell step;
    if (r.outcome.first_divergence_step) step = std::uint64_t{*r.outcome.first_divergence_step};
    t.rows.push_back({to_string(r.placement), r.weight_decay, r.seed, r.outcome.diverged, step,
                      r.outcome.final_loss});
  }
  return t;
}

ReportTable gradcheck_table(const std::vector<GradcheckRow>& rows) {
  ReportTable t{{"instance", "target", "placement", "rel_err"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({std::uint64_t{r.instance}, r.target, r.placement, r.rel_err});
  return t;
}

ReportWriter::ReportWriter(std::filesystem::path dir, ReportFormat format)
    : dir_(std::move(dir)), format_(format) {}

std::filesystem::path ReportWriter::write(const std::string& stem, const ReportTable& table) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error("cannot create output directory '" + dir_.string() + "': " + ec.message());
  const auto path = dir_ / (stem + extension(format_));
  write_report(table, format_, path);
  return path;
}

}  // namespace lnlab
