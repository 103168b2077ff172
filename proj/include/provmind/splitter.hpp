#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "provmind/taskgen.hpp"

namespace provmind {

enum class Protocol { random, year, type, dual };
enum class Partition { train, dev, test, excluded };
enum class Granularity { doi, item };

inline constexpr std::array<Protocol, 4> kAllProtocols{Protocol::random, Protocol::year, Protocol::type,
                                                       Protocol::dual};
inline constexpr std::array<Partition, 4> kAllPartitions{Partition::train, Partition::dev, Partition::test,
                                                         Partition::excluded};

std::string_view to_string(Protocol p);
std::string_view to_string(Partition p);
std::string_view to_string(Granularity g);
Protocol protocol_from_string(std::string_view text);
Partition partition_from_string(std::string_view text);
Granularity granularity_from_string(std::string_view text);

struct SplitAssignment {
  Protocol protocol = Protocol::random;
  std::map<std::string, Partition> mapping;  // item_id -> partition
  std::vector<std::string> warnings;

  std::size_t count(Partition p) const;
  /// Partition of an item; throws Error{unknown_item_id}.
  Partition at(const std::string& item_id) const;
  bool operator==(const SplitAssignment&) const = default;
};

struct SplitConfig {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 42;
  MaterialClass held_out_class = MaterialClass::battery;
  double dev_ratio = 0.1;
  Granularity granularity = Granularity::doi;
  int train_max_year = 2019;
  int dev_year = 2020;
  int test_min_year = 2021;

  static SplitConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Item-level shuffle, then contiguous slices of floor(r0 n) / floor(r1 n) /
/// remainder. Throws Error{invalid_params} if the ratios do not sum to 1.
SplitAssignment split_random(std::span<const BenchItem> items, const std::array<double, 3>& ratios,
                             std::uint64_t seed);

/// <= train_max_year -> train, == dev_year -> dev, >= test_min_year -> test.
/// Items without a year are excluded with a warning.
SplitAssignment split_by_year(std::span<const BenchItem> items, const SplitConfig& config = {});

/// Held-out class -> test; every other item goes to train or dev by a seeded
/// draw of dev_ratio of the non-held-out items, by DOI or by item.
SplitAssignment split_by_type(std::span<const BenchItem> items, const SplitConfig& config = {});

/// train: not held out and year <= train_max_year; dev: not held out and
/// year == dev_year; test: held out and year >= test_min_year; rest excluded.
SplitAssignment split_dual(std::span<const BenchItem> items, const SplitConfig& config = {});

SplitAssignment make_split(Protocol protocol, std::span<const BenchItem> items, const SplitConfig& config);

/// Rows are train partitions, columns test partitions, one per assignment.
struct ContaminationMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::MatrixXd values;

  double at(std::string_view train_label, std::string_view test_label) const;
};

/// entry(A, B) = |DOIs(test of B) ∩ DOIs(train of A)| / |DOIs(test of B)|.
/// Throws Error{empty_test_partition} when a test side has no DOI.
ContaminationMatrix contamination_matrix(std::span<const SplitAssignment> assignments,
                                         std::span<const BenchItem> items);

double contamination(const SplitAssignment& train_side, const SplitAssignment& test_side,
                     std::span<const BenchItem> items);

struct PartitionStats {
  Partition partition = Partition::train;
  std::size_t count = 0;
  std::size_t unique_dois = 0;
  std::map<MaterialClass, double> class_percent;
  int year_min = 0;
  int year_max = 0;

  bool operator==(const PartitionStats&) const = default;
};

struct SplitReport {
  Protocol protocol = Protocol::random;
  std::vector<PartitionStats> rows;  // train, dev, test, excluded

  nlohmann::json to_json() const;
  std::string to_text() const;
};

SplitReport split_report(const SplitAssignment& assignment, std::span<const BenchItem> items);

inline constexpr std::string_view kSplitFormat = "provmind-split";
inline constexpr int kSplitVersion = 1;

void write_assignment(const std::string& path, const SplitAssignment& assignment, const nlohmann::json& header_extra);
SplitAssignment read_assignment(const std::string& path);

/// Items whose partition under `assignment` is `p`, in input order.
std::vector<BenchItem> items_in(std::span<const BenchItem> items, const SplitAssignment& assignment, Partition p);

}  // namespace provmind
