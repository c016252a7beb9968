#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tmf {

/// One timestamped rating event, as read from a dataset.
struct RatingLog {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const RatingLog&) const = default;
};

enum class DatasetFormat {
  kCsv,        // user,item,rating,timestamp with optional header
  kTsv,        // tab separated, same column order
  kMovieLens,  // user::item::rating::timestamp
};

DatasetFormat parse_dataset_format(std::string_view tag);
std::string_view to_string(DatasetFormat format);

/// Reads every log in `path`. Duplicate (user, item) pairs keep the record
/// with the latest timestamp; on equal timestamps the later line wins.
std::vector<RatingLog> ingest(const std::filesystem::path& path, DatasetFormat format);
std::vector<RatingLog> ingest(std::istream& in, DatasetFormat format);

/// Keeps the latest-timestamp record per (user, item). Preserves input order
/// of the surviving records.
std::vector<RatingLog> deduplicate(std::vector<RatingLog> logs);

void write_logs_csv(std::ostream& out, std::span<const RatingLog> logs);

/// Dense bijection between external string ids and indices 0..size()-1.
class IdMap {
 public:
  std::uint32_t intern(const std::string& id);
  /// Returns size() when `id` is unknown.
  std::uint32_t find(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const std::string& name(std::uint32_t index) const { return names_.at(index); }
  std::size_t size() const noexcept { return names_.size(); }

  /// Identity map "0".."n-1".
  static IdMap sequential(std::size_t n);

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::string> names_;
};

struct IdMaps {
  IdMap users;
  IdMap items;
  /// Users/items with index below these counts occur in the training logs;
  /// the remainder appear only in the testing slice.
  std::size_t training_users = 0;
  std::size_t training_items = 0;
};

struct Triplet {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double rating = 0.0;

  bool operator==(const Triplet&) const = default;
};

/// Sparse rating matrix stored as user-major triplets with row offsets.
class SparseRatings {
 public:
  SparseRatings() = default;
  /// Throws ConfigError on a duplicate (user, item) pair or an index outside
  /// [0, num_users) x [0, num_items).
  SparseRatings(std::vector<Triplet> triplets, std::size_t num_users, std::size_t num_items);

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t size() const noexcept { return triplets_.size(); }
  bool empty() const noexcept { return triplets_.empty(); }

  std::span<const Triplet> triplets() const noexcept { return triplets_; }
  std::span<const Triplet> user_ratings(std::uint32_t user) const;
  bool contains(std::uint32_t user, std::uint32_t item) const;
  /// Rating at (user, item); throws std::out_of_range when missing.
  double at(std::uint32_t user, std::uint32_t item) const;

  bool operator==(const SparseRatings&) const = default;

 private:
  std::vector<Triplet> triplets_;
  std::vector<std::size_t> row_offsets_;
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
};

struct SliceOptions {
  int n_slices = 10;
  int window = 5;
  /// Split the time span into equal-width intervals instead of equal counts.
  bool equal_duration = false;

  void validate() const;
};

/// Chronological slices merged into overlapping time steps R(1)..R(T-1),
/// with the final slice held out for testing.
struct SlicedCorpus {
  IdMaps ids;
  int window = 1;
  std::vector<SparseRatings> steps;
  SparseRatings training;
  SparseRatings testing;

  /// T, the index of the held-out step.
  int horizon() const noexcept { return static_cast<int>(steps.size()) + 1; }
  std::size_t num_users() const noexcept { return training.num_users(); }
  std::size_t num_items() const noexcept { return training.num_items(); }
};

/// Sorted-and-partitioned view of the logs, exposed for inspection and tests.
struct SlicePlan {
  std::vector<RatingLog> sorted;
  /// slice s covers sorted[bounds[s], bounds[s+1]).
  std::vector<std::size_t> bounds;
};

SlicePlan plan_slices(std::vector<RatingLog> logs, const SliceOptions& options);

SlicedCorpus slice_and_window(std::vector<RatingLog> logs, const SliceOptions& options);

/// Drops testing triplets whose user or item never occurs in training.
SlicedCorpus filter_test_set(SlicedCorpus corpus);

}  // namespace tmf
