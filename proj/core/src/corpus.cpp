#include "tmf/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "tmf/error.hpp"

namespace tmf {
namespace {

__extension__ typedef unsigned __int128 Wide;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line, std::string_view delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + delim.size();
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, std::int64_t& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view delimiter(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::kCsv:
      return ",";
    case DatasetFormat::kTsv:
      return "\t";
    case DatasetFormat::kMovieLens:
      return "::";
  }
  return ",";
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view tag) {
  if (tag == "csv") return DatasetFormat::kCsv;
  if (tag == "tsv") return DatasetFormat::kTsv;
  if (tag == "movielens") return DatasetFormat::kMovieLens;
  throw ConfigError("unknown dataset format '" + std::string(tag) +
                    "' (expected csv, tsv or movielens)");
}

std::string_view to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::kCsv:
      return "csv";
    case DatasetFormat::kTsv:
      return "tsv";
    case DatasetFormat::kMovieLens:
      return "movielens";
  }
  return "csv";
}

std::vector<RatingLog> ingest(std::istream& in, DatasetFormat format) {
  const auto delim = delimiter(format);
  std::vector<RatingLog> logs;
  std::string line;
  std::size_t line_no = 0;
  bool seen_record = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;

    const auto fields = split(body, delim);
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 fields (user, item, rating, timestamp), got " +
                                    std::to_string(fields.size()));
    }
    RatingLog log;
    std::int64_t ts = 0;
    const bool rating_ok = parse_double(fields[2], log.rating);
    const bool ts_ok = parse_int(fields[3], ts);
    if (!seen_record && !rating_ok && !ts_ok) {
      // header row
      seen_record = true;
      continue;
    }
    seen_record = true;
    if (!rating_ok || !std::isfinite(log.rating)) {
      throw ParseError(line_no, "invalid rating '" + std::string(fields[2]) + "'");
    }
    if (!ts_ok) {
      throw ParseError(line_no, "invalid timestamp '" + std::string(fields[3]) + "'");
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError(line_no, "empty user or item id");
    }
    log.user = std::string(fields[0]);
    log.item = std::string(fields[1]);
    log.timestamp = ts;
    logs.push_back(std::move(log));
  }
  if (logs.empty()) throw EmptyCorpusError("rating log contains no records");
  return deduplicate(std::move(logs));
}

std::vector<RatingLog> ingest(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rating log " + path.string());
  try {
    return ingest(in, format);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

std::vector<RatingLog> deduplicate(std::vector<RatingLog> logs) {
  struct PairHash {
    std::size_t operator()(const std::pair<std::string, std::string>& p) const {
      const auto h1 = std::hash<std::string>{}(p.first);
      const auto h2 = std::hash<std::string>{}(p.second);
      return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
    }
  };
  std::unordered_map<std::pair<std::string, std::string>, std::size_t, PairHash> winner;
  winner.reserve(logs.size());
  for (std::size_t k = 0; k < logs.size(); ++k) {
    auto [it, inserted] = winner.try_emplace({logs[k].user, logs[k].item}, k);
    if (!inserted && logs[k].timestamp >= logs[it->second].timestamp) it->second = k;
  }
  if (winner.size() == logs.size()) return logs;

  std::vector<bool> keep(logs.size(), false);
  for (const auto& [key, k] : winner) keep[k] = true;
  std::vector<RatingLog> out;
  out.reserve(winner.size());
  for (std::size_t k = 0; k < logs.size(); ++k) {
    if (keep[k]) out.push_back(std::move(logs[k]));
  }
  return out;
}

void write_logs_csv(std::ostream& out, std::span<const RatingLog> logs) {
  out << "user,item,rating,timestamp\n";
  char buf[64];
  for (const auto& log : logs) {
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), log.rating);
    (void)ec;
    out << log.user << ',' << log.item << ',' << std::string_view(buf, end - buf) << ','
        << log.timestamp << '\n';
  }
}

// ---------------------------------------------------------------------------

std::uint32_t IdMap::intern(const std::string& id) {
  auto [it, inserted] = index_.try_emplace(id, static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.push_back(id);
  return it->second;
}

std::uint32_t IdMap::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? static_cast<std::uint32_t>(names_.size()) : it->second;
}

IdMap IdMap::sequential(std::size_t n) {
  IdMap map;
  map.names_.reserve(n);
  map.index_.reserve(n);
  for (std::size_t k = 0; k < n; ++k) map.intern(std::to_string(k));
  return map;
}

// ---------------------------------------------------------------------------

SparseRatings::SparseRatings(std::vector<Triplet> triplets, std::size_t num_users,
                             std::size_t num_items)
    : triplets_(std::move(triplets)), num_users_(num_users), num_items_(num_items) {
  for (const auto& t : triplets_) {
    if (t.user >= num_users_ || t.item >= num_items_) {
      throw ConfigError("rating (" + std::to_string(t.user) + ", " + std::to_string(t.item) +
                        ") outside a " + std::to_string(num_users_) + "x" +
                        std::to_string(num_items_) + " matrix");
    }
  }
  std::stable_sort(triplets_.begin(), triplets_.end(), [](const Triplet& a, const Triplet& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  for (std::size_t k = 1; k < triplets_.size(); ++k) {
    if (triplets_[k].user == triplets_[k - 1].user && triplets_[k].item == triplets_[k - 1].item) {
      throw ConfigError("duplicate rating for (" + std::to_string(triplets_[k].user) + ", " +
                        std::to_string(triplets_[k].item) + ")");
    }
  }
  row_offsets_.assign(num_users_ + 1, 0);
  for (const auto& t : triplets_) ++row_offsets_[t.user + 1];
  for (std::size_t u = 0; u < num_users_; ++u) row_offsets_[u + 1] += row_offsets_[u];
}

std::span<const Triplet> SparseRatings::user_ratings(std::uint32_t user) const {
  if (user >= num_users_) return {};
  return std::span<const Triplet>(triplets_).subspan(
      row_offsets_[user], row_offsets_[user + 1] - row_offsets_[user]);
}

bool SparseRatings::contains(std::uint32_t user, std::uint32_t item) const {
  const auto row = user_ratings(user);
  return std::binary_search(row.begin(), row.end(), Triplet{user, item, 0.0},
                            [](const Triplet& a, const Triplet& b) { return a.item < b.item; });
}

double SparseRatings::at(std::uint32_t user, std::uint32_t item) const {
  const auto row = user_ratings(user);
  const auto it = std::lower_bound(row.begin(), row.end(), item,
                                   [](const Triplet& a, std::uint32_t j) { return a.item < j; });
  if (it == row.end() || it->item != item) {
    throw std::out_of_range("no rating for (" + std::to_string(user) + ", " +
                            std::to_string(item) + ")");
  }
  return it->rating;
}

// ---------------------------------------------------------------------------

void SliceOptions::validate() const {
  if (n_slices < 2) throw ConfigError("n_slices must be at least 2");
  if (window < 1) throw ConfigError("window must be at least 1");
  if (window >= n_slices) {
    throw ConfigError("window (" + std::to_string(window) + ") must be smaller than n_slices (" +
                      std::to_string(n_slices) + ")");
  }
}

SlicePlan plan_slices(std::vector<RatingLog> logs, const SliceOptions& options) {
  options.validate();
  if (logs.empty()) throw EmptyCorpusError("cannot slice an empty rating log");

  std::stable_sort(logs.begin(), logs.end(), [](const RatingLog& a, const RatingLog& b) {
    return a.timestamp < b.timestamp;
  });

  const auto n = static_cast<std::size_t>(options.n_slices);
  SlicePlan plan;
  plan.bounds.assign(n + 1, 0);
  if (!options.equal_duration) {
    const std::size_t base = logs.size() / n;
    const std::size_t extra = logs.size() % n;
    for (std::size_t s = 0; s < n; ++s) {
      plan.bounds[s + 1] = plan.bounds[s] + base + (s < extra ? 1 : 0);
    }
  } else {
    const auto t0 = logs.front().timestamp;
    const auto distance = [t0](std::int64_t ts) {
      return static_cast<Wide>(static_cast<std::uint64_t>(ts) - static_cast<std::uint64_t>(t0));
    };
    const Wide span = distance(logs.back().timestamp) + 1;
    std::vector<std::size_t> counts(n, 0);
    for (const auto& log : logs) {
      const Wide offset = distance(log.timestamp);
      const auto s = static_cast<std::size_t>(offset * n / span);
      ++counts[std::min(s, n - 1)];
    }
    for (std::size_t s = 0; s < n; ++s) plan.bounds[s + 1] = plan.bounds[s] + counts[s];
  }
  plan.sorted = std::move(logs);
  return plan;
}

SlicedCorpus slice_and_window(std::vector<RatingLog> logs, const SliceOptions& options) {
  auto plan = plan_slices(std::move(logs), options);
  const auto n = static_cast<std::size_t>(options.n_slices);
  const auto window = static_cast<std::size_t>(options.window);
  const auto& sorted = plan.sorted;
  const std::size_t train_end = plan.bounds[n - 1];

  SlicedCorpus corpus;
  corpus.window = options.window;
  auto& ids = corpus.ids;
  std::vector<std::uint32_t> user_of(sorted.size());
  std::vector<std::uint32_t> item_of(sorted.size());
  for (std::size_t k = 0; k < train_end; ++k) {
    user_of[k] = ids.users.intern(sorted[k].user);
    item_of[k] = ids.items.intern(sorted[k].item);
  }
  ids.training_users = ids.users.size();
  ids.training_items = ids.items.size();
  for (std::size_t k = train_end; k < sorted.size(); ++k) {
    user_of[k] = ids.users.intern(sorted[k].user);
    item_of[k] = ids.items.intern(sorted[k].item);
  }
  const auto m = ids.users.size();
  const auto items = ids.items.size();

  auto collect = [&](std::size_t begin, std::size_t end) {
    std::vector<Triplet> out;
    out.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
      out.push_back({user_of[k], item_of[k], sorted[k].rating});
    }
    return SparseRatings(std::move(out), m, items);
  };

  const std::size_t num_steps = n - window;
  corpus.steps.reserve(num_steps);
  for (std::size_t t = 0; t < num_steps; ++t) {
    corpus.steps.push_back(collect(plan.bounds[t], plan.bounds[t + window]));
  }
  corpus.training = collect(0, train_end);
  corpus.testing = collect(train_end, sorted.size());
  return corpus;
}

SlicedCorpus filter_test_set(SlicedCorpus corpus) {
  const auto& ids = corpus.ids;
  std::vector<Triplet> kept;
  kept.reserve(corpus.testing.size());
  for (const auto& t : corpus.testing.triplets()) {
    if (t.user < ids.training_users && t.item < ids.training_items) kept.push_back(t);
  }
  corpus.testing =
      SparseRatings(std::move(kept), corpus.testing.num_users(), corpus.testing.num_items());
  return corpus;
}

}  // namespace tmf
