#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "mfrto/campaign.hpp"

namespace mfrto {

namespace {

constexpr std::size_t kIteration = 1;
constexpr std::size_t kCost = 9;
constexpr std::size_t kBestFeasible = 11;
constexpr std::size_t kViolated = 12;

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct IterationBand {
  int n = 0;
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  int best_n = 0;
  double best_sum = 0.0;
  int violations = 0;
};

std::map<int, IterationBand> bands_of(const CampaignData& data) {
  std::map<int, IterationBand> bands;
  for (const auto& row : data.rows) {
    auto& b = bands[std::stoi(row[kIteration])];
    if (const auto c = number(row[kCost])) {
      ++b.n;
      b.sum += *c;
      b.lo = std::min(b.lo, *c);
      b.hi = std::max(b.hi, *c);
    }
    if (const auto f = number(row[kBestFeasible])) {
      ++b.best_n;
      b.best_sum += *f;
    }
    if (std::stoi(row[kViolated]) > 0) ++b.violations;
  }
  return bands;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

CampaignData read_campaign_dir(const std::filesystem::path& dir) {
  CampaignData data;
  data.label = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();

  std::ifstream js(dir / "summary.json");
  if (!js) throw SchemaMismatch(dir.string() + ": missing summary.json");
  try {
    data.summary = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(dir.string() + "/summary.json: " + e.what());
  }
  if (!data.summary.is_object()) throw SchemaMismatch(dir.string() + "/summary.json: not an object");
  for (const auto& key : summary_required_keys()) {
    if (!data.summary.contains(key)) {
      throw SchemaMismatch(dir.string() + "/summary.json: missing key '" + key + "'");
    }
  }
  if (data.summary["schema_version"] != 1) {
    throw SchemaMismatch(dir.string() + "/summary.json: unsupported schema_version");
  }

  std::ifstream csv(dir / "results.csv");
  if (!csv) throw SchemaMismatch(dir.string() + ": missing results.csv");
  std::string line;
  if (!std::getline(csv, line) || line != kResultsHeader) {
    throw SchemaMismatch(dir.string() + "/results.csv: unexpected header");
  }
  const std::size_t width = split(std::string(kResultsHeader), ',').size();
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != width || !number(fields[kIteration]) || !number(fields[kViolated])) {
      throw SchemaMismatch(dir.string() + "/results.csv: malformed row " + std::to_string(line_no));
    }
    data.rows.push_back(std::move(fields));
  }
  return data;
}

void write_comparison_csv(const std::vector<CampaignData>& campaigns, std::ostream& out) {
  out << kComparisonHeader << '\n';
  for (const auto& c : campaigns) {
    const std::string scenario = c.summary.value("scenario", "");
    int cumulative = 0;
    for (const auto& [iteration, b] : bands_of(c)) {
      cumulative += b.violations;
      out << c.label << ',' << scenario << ',' << iteration << ',' << b.n << ','
          << (b.n > 0 ? fmt(b.sum / b.n) : "") << ',' << fmt(b.lo) << ',' << fmt(b.hi) << ','
          << (b.best_n > 0 ? fmt(b.best_sum / b.best_n) : "") << ',' << cumulative << '\n';
    }
  }
}

nlohmann::json comparison_summary(const std::vector<CampaignData>& campaigns) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& c : campaigns) {
    int cumulative = 0;
    int last = -1;
    for (const auto& [iteration, b] : bands_of(c)) {
      cumulative += b.violations;
      last = iteration;
    }
    entries.push_back({{"label", c.label},
                       {"final_iteration", last},
                       {"cumulative_violations", cumulative},
                       {"summary", c.summary}});
  }
  return {{"campaigns", entries}};
}

}  // namespace mfrto
