#pragma once

#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/core/calendar.hpp"
#include "nowcast/core/csv.hpp"
#include "nowcast/core/digest.hpp"
#include "nowcast/core/errors.hpp"

namespace nowcast {

/// One publication event: the value of (series, period) as released on a date.
/// A later published_at for the same (series, period) is a revision.
struct SeriesObservation {
  std::string series_id;
  Period ref_period;
  double value = 0.0;
  Date published_at;

  friend bool operator==(const SeriesObservation&, const SeriesObservation&) = default;
};

struct IngestReject {
  std::size_t row = 0;  // position in the ingested batch
  std::string reason;
};

struct IngestSummary {
  std::size_t inserts = 0;
  std::size_t revisions = 0;
  std::size_t rejects = 0;
  std::vector<IngestReject> reject_details;
};

struct SnapshotCell {
  double value = 0.0;
  Date published_at;
};

/// What a real-time observer could see on `as_of`: for each (series, period),
/// the value with the latest published_at <= as_of. Pure function of the log.
struct Snapshot {
  Date as_of;
  // series -> period -> cell; std::map keeps iteration deterministic
  std::map<std::string, std::map<Period, SnapshotCell>> panel;
  std::map<std::string, Period> ragged_edge;  // per-series last available ref_period

  [[nodiscard]] std::optional<double> value(const std::string& series, const Period& p) const {
    auto s = panel.find(series);
    if (s == panel.end()) return std::nullopt;
    auto c = s->second.find(p);
    if (c == s->second.end()) return std::nullopt;
    return c->second.value;
  }
};

/// Append-only publication history. Single writer; snapshots taken from it are
/// immutable values safe to share.
class ObservationLog {
 public:
  explicit ObservationLog(int early_release_allowance_days = 0)
      : allowance_days_(early_release_allowance_days) {}

  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] const std::vector<SeriesObservation>& entries() const { return entries_; }

  IngestSummary ingest(const std::vector<SeriesObservation>& records) {
    IngestSummary summary;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& rec = records[i];
      std::string reason;
      if (!accept(rec, reason)) {
        ++summary.rejects;
        summary.reject_details.push_back({i, reason});
        continue;
      }
      const Key key{rec.series_id, rec.ref_period};
      auto it = by_key_.find(key);
      const bool revision = it != by_key_.end();
      entries_.push_back(rec);
      by_key_[key].push_back(entries_.size() - 1);
      if (revision)
        ++summary.revisions;
      else
        ++summary.inserts;
      auto fit = frequency_.find(rec.series_id);
      if (fit == frequency_.end()) frequency_.emplace(rec.series_id, rec.ref_period.freq);
      if (first_pub_ == std::nullopt || rec.published_at < *first_pub_) first_pub_ = rec.published_at;
    }
    return summary;
  }

  [[nodiscard]] Snapshot snapshot_at(const Date& as_of) const {
    if (entries_.empty()) throw ValidationError("snapshot requested on an empty observation log");
    if (first_pub_ && as_of < *first_pub_)
      throw ValidationError("empty snapshot: as_of " + as_of.str() +
                            " precedes the earliest publication " + first_pub_->str());
    Snapshot snap;
    snap.as_of = as_of;
    for (const auto& [key, idxs] : by_key_) {
      const SeriesObservation* best = nullptr;
      for (std::size_t idx : idxs) {
        const auto& obs = entries_[idx];
        if (obs.published_at > as_of) continue;
        if (!best || obs.published_at > best->published_at) best = &obs;
      }
      if (!best) continue;
      snap.panel[key.series][key.period] = SnapshotCell{best->value, best->published_at};
      auto re = snap.ragged_edge.find(key.series);
      if (re == snap.ragged_edge.end() || key.period > re->second)
        snap.ragged_edge[key.series] = key.period;
    }
    if (snap.panel.empty())
      throw ValidationError("empty snapshot: no observation published on or before " + as_of.str());
    return snap;
  }

  /// Earliest publication date of (series, period), if any entry exists.
  [[nodiscard]] std::optional<Date> first_release_date(const std::string& series,
                                                       const Period& p) const {
    auto it = by_key_.find(Key{series, p});
    if (it == by_key_.end()) return std::nullopt;
    std::optional<Date> best;
    for (std::size_t idx : it->second) {
      const Date d = entries_[idx].published_at;
      if (!best || d < *best) best = d;
    }
    return best;
  }

  [[nodiscard]] std::optional<Date> latest_publication_date() const {
    std::optional<Date> best;
    for (const auto& e : entries_)
      if (!best || e.published_at > *best) best = e.published_at;
    return best;
  }

  [[nodiscard]] std::optional<Frequency> series_frequency(const std::string& series) const {
    auto it = frequency_.find(series);
    if (it == frequency_.end()) return std::nullopt;
    return it->second;
  }

  /// Order-insensitive digest of the log contents (audit trail input).
  [[nodiscard]] std::string digest() const {
    std::uint64_t acc = 0;
    for (const auto& e : entries_) {
      Digest d;
      d.update(e.series_id).update(e.ref_period.str());
      d.update(format_double(e.value)).update(e.published_at.str());
      acc += d.value();  // wraparound sum keeps the digest order-insensitive
    }
    Digest final;
    final.update_u64(acc).update_u64(entries_.size());
    return final.hex();
  }

 private:
  struct Key {
    std::string series;
    Period period;
    friend auto operator<=>(const Key&, const Key&) = default;
  };

  bool accept(const SeriesObservation& rec, std::string& reason) const {
    if (rec.series_id.empty()) {
      reason = "empty series_id";
      return false;
    }
    if (!std::isfinite(rec.value)) {
      reason = "non-finite value";
      return false;
    }
    const Date earliest_allowed = rec.ref_period.last_date().plus_days(-allowance_days_);
    if (rec.published_at < earliest_allowed) {
      reason = "published_at " + rec.published_at.str() + " precedes end of " +
               rec.ref_period.str() + " minus the early-release allowance";
      return false;
    }
    auto fit = frequency_.find(rec.series_id);
    if (fit != frequency_.end() && fit->second != rec.ref_period.freq) {
      reason = "frequency conflict: series " + rec.series_id + " is " + to_string(fit->second);
      return false;
    }
    auto it = by_key_.find(Key{rec.series_id, rec.ref_period});
    if (it != by_key_.end()) {
      for (std::size_t idx : it->second) {
        const auto& prev = entries_[idx];
        if (prev.published_at == rec.published_at) {
          reason = prev.value == rec.value ? "duplicate" : "published_at tie with different value";
          return false;
        }
      }
    }
    return true;
  }

  int allowance_days_;
  std::vector<SeriesObservation> entries_;
  std::map<Key, std::vector<std::size_t>> by_key_;
  std::map<std::string, Frequency> frequency_;
  std::optional<Date> first_pub_;
};

// ---------------------------------------------------------------------------
// Observation CSV: header `series_id,ref_period,value,published_at,frequency`

struct CsvParseResult {
  std::vector<SeriesObservation> records;
  std::vector<IngestReject> malformed;  // rows that did not parse at all
};

inline CsvParseResult parse_observation_csv(const std::vector<std::string>& lines) {
  CsvParseResult out;
  if (lines.empty()) throw ValidationError("observation CSV is empty");
  const auto header = csv_split(lines[0]);
  const std::vector<std::string> expected{"series_id", "ref_period", "value", "published_at",
                                          "frequency"};
  if (header != expected)
    throw ValidationError("observation CSV header must be 'series_id,ref_period,value,published_at,frequency'");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv_split(lines[i]);
    if (f.size() != 5) {
      out.malformed.push_back({i, "expected 5 fields, got " + std::to_string(f.size())});
      continue;
    }
    auto period = Period::parse(f[1]);
    if (!period) {
      out.malformed.push_back({i, "malformed period '" + f[1] + "'"});
      continue;
    }
    auto freq = frequency_from_string(f[4]);
    if (!freq) {
      out.malformed.push_back(
          {i, "unknown frequency '" + f[4] +
                  "' (weekly/daily indicators require bridge modeling, which is not implemented)"});
      continue;
    }
    if (*freq != period->freq) {
      out.malformed.push_back({i, "frequency field disagrees with ref_period format"});
      continue;
    }
    auto pub = Date::parse(f[3]);
    if (!pub) {
      out.malformed.push_back({i, "malformed published_at '" + f[3] + "'"});
      continue;
    }
    char* end = nullptr;
    const double value = std::strtod(f[2].c_str(), &end);
    if (f[2].empty() || end != f[2].c_str() + f[2].size()) {
      out.malformed.push_back({i, "malformed value '" + f[2] + "'"});
      continue;
    }
    out.records.push_back(SeriesObservation{f[0], *period, value, *pub});
  }
  return out;
}

inline std::string observation_csv(const std::vector<SeriesObservation>& records) {
  std::string out = "series_id,ref_period,value,published_at,frequency\n";
  for (const auto& r : records) {
    out += csv_join({r.series_id, r.ref_period.str(), format_double(r.value),
                     r.published_at.str(), to_string(r.ref_period.freq)});
    out += '\n';
  }
  return out;
}

}  // namespace nowcast
