#include "provmind/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "provmind/io.hpp"

namespace provmind {

using nlohmann::json;

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::random: return "random";
    case Protocol::year: return "year";
    case Protocol::type: return "type";
    case Protocol::dual: return "dual";
  }
  return "random";
}

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::dev: return "dev";
    case Partition::test: return "test";
    case Partition::excluded: return "excluded";
  }
  return "excluded";
}

std::string_view to_string(Granularity g) { return g == Granularity::doi ? "doi" : "item"; }

Protocol protocol_from_string(std::string_view text) {
  for (auto p : kAllProtocols) {
    if (text == to_string(p)) return p;
  }
  throw Error(ErrorCode::invalid_params, "unknown split protocol '" + std::string(text) + "'");
}

Partition partition_from_string(std::string_view text) {
  for (auto p : kAllPartitions) {
    if (text == to_string(p)) return p;
  }
  throw Error(ErrorCode::invalid_params, "unknown partition '" + std::string(text) + "'");
}

Granularity granularity_from_string(std::string_view text) {
  if (text == "doi") return Granularity::doi;
  if (text == "item") return Granularity::item;
  throw Error(ErrorCode::invalid_params, "unknown granularity '" + std::string(text) + "'");
}

std::size_t SplitAssignment::count(Partition p) const {
  return static_cast<std::size_t>(
      std::count_if(mapping.begin(), mapping.end(), [p](const auto& kv) { return kv.second == p; }));
}

Partition SplitAssignment::at(const std::string& item_id) const {
  auto it = mapping.find(item_id);
  if (it == mapping.end()) throw Error(ErrorCode::unknown_item_id, "item '" + item_id + "' has no partition");
  return it->second;
}

SplitConfig SplitConfig::from_json(const json& j) {
  SplitConfig c;
  if (j.contains("ratios")) {
    for (std::size_t i = 0; i < 3; ++i) c.ratios[i] = j["ratios"].at(i).get<double>();
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("held_out_class")) c.held_out_class = material_class_from_string(j["held_out_class"].get<std::string>());
  c.dev_ratio = j.value("dev_ratio", c.dev_ratio);
  if (j.contains("granularity")) c.granularity = granularity_from_string(j["granularity"].get<std::string>());
  c.train_max_year = j.value("train_max_year", c.train_max_year);
  c.dev_year = j.value("dev_year", c.dev_year);
  c.test_min_year = j.value("test_min_year", c.test_min_year);
  return c;
}

json SplitConfig::to_json() const {
  return json{{"ratios", ratios},
              {"seed", seed},
              {"held_out_class", to_string(held_out_class)},
              {"dev_ratio", dev_ratio},
              {"granularity", to_string(granularity)},
              {"train_max_year", train_max_year},
              {"dev_year", dev_year},
              {"test_min_year", test_min_year}};
}

SplitAssignment split_random(std::span<const BenchItem> items, const std::array<double, 3>& ratios,
                             std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw Error(ErrorCode::invalid_params, "split ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, std::string_view("split_random")));
  rng.shuffle(order);
  const auto n = static_cast<double>(items.size());
  const auto n_train = static_cast<std::size_t>(std::floor(ratios[0] * n + 1e-9));
  const auto n_dev = static_cast<std::size_t>(std::floor(ratios[1] * n + 1e-9));
  SplitAssignment a;
  a.protocol = Protocol::random;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Partition p = rank < n_train ? Partition::train : rank < n_train + n_dev ? Partition::dev : Partition::test;
    a.mapping[items[order[rank]].item_id] = p;
  }
  return a;
}

namespace {

void note_missing_year(SplitAssignment& a, const BenchItem& item) {
  a.mapping[item.item_id] = Partition::excluded;
  a.warnings.push_back(std::string(to_string(ErrorCode::missing_year)) + ": " + item.item_id);
}

}  // namespace

SplitAssignment split_by_year(std::span<const BenchItem> items, const SplitConfig& config) {
  SplitAssignment a;
  a.protocol = Protocol::year;
  for (const auto& item : items) {
    if (item.year == 0) {
      note_missing_year(a, item);
      continue;
    }
    Partition p = Partition::excluded;
    if (item.year <= config.train_max_year) p = Partition::train;
    else if (item.year == config.dev_year) p = Partition::dev;
    else if (item.year >= config.test_min_year) p = Partition::test;
    a.mapping[item.item_id] = p;
  }
  return a;
}

SplitAssignment split_by_type(std::span<const BenchItem> items, const SplitConfig& config) {
  if (config.dev_ratio < 0.0 || config.dev_ratio > 1.0) throw Error(ErrorCode::invalid_params, "dev_ratio out of [0,1]");
  SplitAssignment a;
  a.protocol = Protocol::type;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].material_class == config.held_out_class) {
      a.mapping[items[i].item_id] = Partition::test;
    } else {
      a.mapping[items[i].item_id] = Partition::train;
      rest.push_back(i);
    }
  }
  const auto dev_target = static_cast<std::size_t>(std::floor(config.dev_ratio * static_cast<double>(rest.size()) + 1e-9));
  Rng rng(derive_seed(config.seed, std::string_view("split_type")));
  if (config.granularity == Granularity::item) {
    rng.shuffle(rest);
    for (std::size_t r = 0; r < dev_target; ++r) a.mapping[items[rest[r]].item_id] = Partition::dev;
    return a;
  }
  std::map<std::string, std::vector<std::size_t>> by_doi;
  for (std::size_t i : rest) by_doi[items[i].doi].push_back(i);
  std::vector<std::string> dois;
  for (const auto& [doi, members] : by_doi) dois.push_back(doi);
  rng.shuffle(dois);
  std::size_t in_dev = 0;
  for (const auto& doi : dois) {
    if (in_dev >= dev_target) break;
    for (std::size_t i : by_doi[doi]) a.mapping[items[i].item_id] = Partition::dev;
    in_dev += by_doi[doi].size();
  }
  return a;
}

SplitAssignment split_dual(std::span<const BenchItem> items, const SplitConfig& config) {
  SplitAssignment a;
  a.protocol = Protocol::dual;
  for (const auto& item : items) {
    if (item.year == 0) {
      note_missing_year(a, item);
      continue;
    }
    const bool held_out = item.material_class == config.held_out_class;
    Partition p = Partition::excluded;
    if (!held_out && item.year <= config.train_max_year) p = Partition::train;
    else if (!held_out && item.year == config.dev_year) p = Partition::dev;
    else if (held_out && item.year >= config.test_min_year) p = Partition::test;
    a.mapping[item.item_id] = p;
  }
  return a;
}

SplitAssignment make_split(Protocol protocol, std::span<const BenchItem> items, const SplitConfig& config) {
  switch (protocol) {
    case Protocol::random: return split_random(items, config.ratios, config.seed);
    case Protocol::year: return split_by_year(items, config);
    case Protocol::type: return split_by_type(items, config);
    case Protocol::dual: return split_dual(items, config);
  }
  throw Error(ErrorCode::invalid_params, "unknown protocol");
}

// Contamination ------------------------------------------------------------------

namespace {

std::set<std::string> dois_in(const SplitAssignment& a, std::span<const BenchItem> items, Partition p) {
  std::set<std::string> dois;
  for (const auto& item : items) {
    auto it = a.mapping.find(item.item_id);
    if (it != a.mapping.end() && it->second == p && !item.doi.empty()) dois.insert(item.doi);
  }
  return dois;
}

}  // namespace

double ContaminationMatrix::at(std::string_view train_label, std::string_view test_label) const {
  auto r = std::find(row_labels.begin(), row_labels.end(), train_label);
  auto c = std::find(col_labels.begin(), col_labels.end(), test_label);
  if (r == row_labels.end() || c == col_labels.end()) {
    throw Error(ErrorCode::invalid_params, "no contamination entry for " + std::string(train_label) + " / " +
                                               std::string(test_label));
  }
  return values(r - row_labels.begin(), c - col_labels.begin());
}

ContaminationMatrix contamination_matrix(std::span<const SplitAssignment> assignments,
                                         std::span<const BenchItem> items) {
  ContaminationMatrix m;
  std::vector<std::set<std::string>> train_dois;
  std::vector<std::set<std::string>> test_dois;
  for (const auto& a : assignments) {
    m.row_labels.push_back(std::string(to_string(a.protocol)) + "-train");
    m.col_labels.push_back(std::string(to_string(a.protocol)) + "-test");
    train_dois.push_back(dois_in(a, items, Partition::train));
    test_dois.push_back(dois_in(a, items, Partition::test));
  }
  m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(assignments.size()),
                                   static_cast<Eigen::Index>(assignments.size()));
  for (std::size_t b = 0; b < assignments.size(); ++b) {
    if (test_dois[b].empty()) {
      throw Error(ErrorCode::empty_test_partition, m.col_labels[b] + " has no DOIs");
    }
    for (std::size_t a = 0; a < assignments.size(); ++a) {
      std::size_t shared = 0;
      for (const auto& doi : test_dois[b]) shared += train_dois[a].count(doi);
      m.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          static_cast<double>(shared) / static_cast<double>(test_dois[b].size());
    }
  }
  return m;
}

double contamination(const SplitAssignment& train_side, const SplitAssignment& test_side,
                     std::span<const BenchItem> items) {
  const auto train = dois_in(train_side, items, Partition::train);
  const auto test = dois_in(test_side, items, Partition::test);
  if (test.empty()) throw Error(ErrorCode::empty_test_partition, std::string(to_string(test_side.protocol)) + "-test has no DOIs");
  std::size_t shared = 0;
  for (const auto& doi : test) shared += train.count(doi);
  return static_cast<double>(shared) / static_cast<double>(test.size());
}

// Reports -------------------------------------------------------------------------

SplitReport split_report(const SplitAssignment& assignment, std::span<const BenchItem> items) {
  SplitReport report;
  report.protocol = assignment.protocol;
  for (auto p : kAllPartitions) {
    PartitionStats row;
    row.partition = p;
    std::set<std::string> dois;
    std::map<MaterialClass, std::size_t> classes;
    bool have_year = false;
    for (const auto& item : items) {
      auto it = assignment.mapping.find(item.item_id);
      if (it == assignment.mapping.end() || it->second != p) continue;
      ++row.count;
      if (!item.doi.empty()) dois.insert(item.doi);
      ++classes[item.material_class];
      if (item.year != 0) {
        row.year_min = have_year ? std::min(row.year_min, item.year) : item.year;
        row.year_max = have_year ? std::max(row.year_max, item.year) : item.year;
        have_year = true;
      }
    }
    row.unique_dois = dois.size();
    for (auto c : {MaterialClass::battery, MaterialClass::thermoelectric, MaterialClass::magnetic,
                   MaterialClass::other}) {
      row.class_percent[c] =
          row.count == 0 ? 0.0 : 100.0 * static_cast<double>(classes[c]) / static_cast<double>(row.count);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

json SplitReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    json classes = json::object();
    for (const auto& [c, pct] : r.class_percent) classes[std::string(to_string(c))] = pct;
    rows_json.push_back({{"partition", to_string(r.partition)},
                         {"count", r.count},
                         {"unique_dois", r.unique_dois},
                         {"class_percent", classes},
                         {"year_min", r.year_min},
                         {"year_max", r.year_max}});
  }
  return json{{"protocol", to_string(protocol)}, {"rows", rows_json}};
}

std::string SplitReport::to_text() const {
  std::ostringstream out;
  out << "protocol: " << to_string(protocol) << '\n';
  out << std::left << std::setw(10) << "partition" << std::right << std::setw(9) << "items" << std::setw(8) << "dois"
      << std::setw(10) << "battery%" << std::setw(9) << "thermo%" << std::setw(9) << "magnet%" << std::setw(9)
      << "other%" << std::setw(12) << "years" << '\n';
  for (const auto& r : rows) {
    std::string years = r.count == 0 || r.year_min == 0 ? std::string("-")
                                                          : std::to_string(r.year_min) + "-" + std::to_string(r.year_max);
    out << std::left << std::setw(10) << to_string(r.partition) << std::right << std::setw(9) << r.count
        << std::setw(8) << r.unique_dois << std::fixed << std::setprecision(2) << std::setw(10)
        << r.class_percent.at(MaterialClass::battery) << std::setw(9)
        << r.class_percent.at(MaterialClass::thermoelectric) << std::setw(9)
        << r.class_percent.at(MaterialClass::magnetic) << std::setw(9) << r.class_percent.at(MaterialClass::other)
        << std::setw(12) << years << '\n';
  }
  return out.str();
}

// Files ---------------------------------------------------------------------------

void write_assignment(const std::string& path, const SplitAssignment& assignment, const json& header_extra) {
  json extra = header_extra;
  extra["protocol"] = to_string(assignment.protocol);
  extra["count"] = assignment.mapping.size();
  extra["warnings"] = assignment.warnings;
  std::vector<json> records;
  records.reserve(assignment.mapping.size());
  for (const auto& [id, p] : assignment.mapping) records.push_back({{"item_id", id}, {"partition", to_string(p)}});
  write_jsonl(path, artifact_header(kSplitFormat, kSplitVersion, extra), records);
}

SplitAssignment read_assignment(const std::string& path) {
  const auto file = read_jsonl(path, kSplitFormat);
  SplitAssignment a;
  a.protocol = protocol_from_string(file.header.value("protocol", "random"));
  a.warnings = file.header.value("warnings", std::vector<std::string>{});
  for (const auto& r : file.records) {
    a.mapping[r.at("item_id").get<std::string>()] = partition_from_string(r.at("partition").get<std::string>());
  }
  return a;
}

std::vector<BenchItem> items_in(std::span<const BenchItem> items, const SplitAssignment& assignment, Partition p) {
  std::vector<BenchItem> out;
  for (const auto& item : items) {
    auto it = assignment.mapping.find(item.item_id);
    if (it != assignment.mapping.end() && it->second == p) out.push_back(item);
  }
  return out;
}

}  // namespace provmind
