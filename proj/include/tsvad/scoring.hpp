#pragma once

// RTTM persistence, optimal reference <-> hypothesis speaker mapping, and
// diarization error rate with a forgiveness collar. Times are handled with
// exact interval arithmetic; overlap regions are scored with multiplicity.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsvad/matrix.hpp"

namespace tsvad {

struct RttmSegment {
  std::string file_id;
  double onset = 0.0;
  double duration = 0.0;
  std::string speaker;

  bool operator==(const RttmSegment& o) const {
    return file_id == o.file_id && onset == o.onset && duration == o.duration &&
           speaker == o.speaker;
  }
};

struct DerReport {
  double miss = 0.0;        // fractions of scored reference speech
  double false_alarm = 0.0;
  double confusion = 0.0;
  double der = 0.0;
  double scored_speech = 0.0;  // seconds
};

inline std::vector<RttmSegment> read_rttm(std::istream& is) {
  std::vector<RttmSegment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag, file, chan, na1, na2, spk, na3, na4;
    double onset, dur;
    if (!(ls >> tag >> file >> chan >> onset >> dur >> na1 >> na2 >> spk >>
          na3 >> na4) ||
        tag != "SPEAKER")
      throw std::runtime_error("malformed RTTM line " + std::to_string(lineno));
    if (dur <= 0.0 || onset < 0.0)
      throw std::runtime_error("invalid times on RTTM line " +
                               std::to_string(lineno));
    out.push_back({file, onset, dur, spk});
  }
  return out;
}

inline void write_rttm(std::ostream& os,
                       const std::vector<RttmSegment>& segments) {
  char buf[64];
  for (const auto& s : segments) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f", s.onset, s.duration);
    os << "SPEAKER " << s.file_id << " 1 " << buf << " <NA> <NA> " << s.speaker
       << " <NA> <NA>\n";
  }
}

namespace detail {

struct Interval {
  double begin, end;
};

inline std::vector<Interval> merged_intervals(
    const std::vector<Interval>& raw) {
  std::vector<Interval> v = raw;
  std::sort(v.begin(), v.end(),
            [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.begin <= out.back().end)
      out.back().end = std::max(out.back().end, iv.end);
    else
      out.push_back(iv);
  }
  return out;
}

inline double intersection_seconds(const std::vector<Interval>& a,
                                   const std::vector<Interval>& b) {
  double s = 0.0;
  for (const auto& x : a)
    for (const auto& y : b)
      s += std::max(0.0, std::min(x.end, y.end) - std::max(x.begin, y.begin));
  return s;
}

inline std::map<std::string, std::vector<Interval>> by_speaker(
    const std::vector<RttmSegment>& segs) {
  std::map<std::string, std::vector<Interval>> out;
  for (const auto& s : segs)
    out[s.speaker].push_back({s.onset, s.onset + s.duration});
  for (auto& [_, v] : out) v = merged_intervals(v);
  return out;
}

}  // namespace detail

// Maximum-total-overlap one-to-one assignment between hypothesis and
// reference speakers. Unmatched hypothesis speakers map to nullopt.
inline std::map<std::string, std::optional<std::string>> optimal_mapping(
    const std::vector<RttmSegment>& ref, const std::vector<RttmSegment>& hyp) {
  const auto rspk = detail::by_speaker(ref);
  const auto hspk = detail::by_speaker(hyp);
  std::vector<std::string> rnames, hnames;
  for (const auto& [k, _] : rspk) rnames.push_back(k);
  for (const auto& [k, _] : hspk) hnames.push_back(k);
  const std::size_t R = rnames.size(), H = hnames.size();
  if (R > 20) throw std::invalid_argument("too many reference speakers");

  std::vector<std::vector<double>> overlap(H, std::vector<double>(R, 0.0));
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t r = 0; r < R; ++r)
      overlap[h][r] = detail::intersection_seconds(hspk.at(hnames[h]),
                                                   rspk.at(rnames[r]));

  // DP over subsets of reference speakers, one hypothesis speaker at a time.
  const std::size_t masks = std::size_t{1} << R;
  std::vector<double> best(masks, -1.0);
  std::vector<std::vector<int>> choice(H, std::vector<int>(masks, -2));
  best[0] = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<double> next(masks, -1.0);
    for (std::size_t m = 0; m < masks; ++m) {
      if (best[m] < 0.0) continue;
      if (next[m] < best[m]) {  // leave h unmatched
        next[m] = best[m];
        choice[h][m] = -1;
      }
      for (std::size_t r = 0; r < R; ++r) {
        if (m & (std::size_t{1} << r)) continue;
        const std::size_t m2 = m | (std::size_t{1} << r);
        const double v = best[m] + overlap[h][r];
        if (v > next[m2]) {
          next[m2] = v;
          choice[h][m2] = static_cast<int>(r);
        }
      }
    }
    best = std::move(next);
  }
  std::size_t arg = 0;
  for (std::size_t m = 1; m < masks; ++m)
    if (best[m] > best[arg]) arg = m;

  std::map<std::string, std::optional<std::string>> mapping;
  std::size_t m = arg;
  for (std::size_t h = H; h-- > 0;) {
    const int c = choice[h][m];
    if (c >= 0) {
      mapping[hnames[h]] = rnames[c];
      m &= ~(std::size_t{1} << c);
    } else {
      mapping[hnames[h]] = std::nullopt;
    }
  }
  // Zero-overlap matches are as good as unmatched; normalize them to none.
  for (auto& [h, r] : mapping)
    if (r) {
      std::size_t hi = std::find(hnames.begin(), hnames.end(), h) - hnames.begin();
      std::size_t ri = std::find(rnames.begin(), rnames.end(), *r) - rnames.begin();
      if (overlap[hi][ri] <= 0.0) r = std::nullopt;
    }
  return mapping;
}

// DER with collar excision: +-collar around every reference segment boundary
// is removed from scoring. Per instant on the remaining timeline with Nref
// active reference speakers, Nhyp active hypothesis speakers, and Ncorrect
// correctly matched pairs:
//   miss      += max(0, Nref - Nhyp)
//   false al. += max(0, Nhyp - Nref)
//   confusion += min(Nref, Nhyp) - Ncorrect
// all normalized by total scored reference speaker-seconds.
inline DerReport der(const std::vector<RttmSegment>& ref,
                     const std::vector<RttmSegment>& hyp,
                     double collar_seconds) {
  if (collar_seconds < 0.0) throw std::invalid_argument("collar must be >= 0");
  if (ref.empty()) throw std::runtime_error("nothing to score");

  const auto rspk = detail::by_speaker(ref);
  const auto hspk = detail::by_speaker(hyp);
  const auto mapping = optimal_mapping(ref, hyp);

  std::vector<detail::Interval> excised_raw;
  for (const auto& s : ref) {
    excised_raw.push_back(
        {s.onset - collar_seconds, s.onset + collar_seconds});
    excised_raw.push_back({s.onset + s.duration - collar_seconds,
                           s.onset + s.duration + collar_seconds});
  }
  const auto excised =
      collar_seconds > 0.0 ? detail::merged_intervals(excised_raw)
                           : std::vector<detail::Interval>{};

  std::vector<double> bounds;
  auto add_bounds = [&bounds](const std::vector<detail::Interval>& v) {
    for (const auto& iv : v) {
      bounds.push_back(iv.begin);
      bounds.push_back(iv.end);
    }
  };
  for (const auto& [_, v] : rspk) add_bounds(v);
  for (const auto& [_, v] : hspk) add_bounds(v);
  add_bounds(excised);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  auto active = [](const std::vector<detail::Interval>& v, double t) {
    for (const auto& iv : v)
      if (t >= iv.begin && t < iv.end) return true;
    return false;
  };

  double miss_t = 0.0, fa_t = 0.0, conf_t = 0.0, scored_ref = 0.0;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    const double len = bounds[i + 1] - bounds[i];
    if (len <= 0.0) continue;
    const double mid = 0.5 * (bounds[i] + bounds[i + 1]);
    if (active(excised, mid)) continue;

    std::size_t nref = 0, nhyp = 0, ncorrect = 0;
    for (const auto& [r, v] : rspk)
      if (active(v, mid)) ++nref;
    for (const auto& [h, v] : hspk) {
      if (!active(v, mid)) continue;
      ++nhyp;
      const auto& m = mapping.at(h);
      if (m && active(rspk.at(*m), mid)) ++ncorrect;
    }
    scored_ref += len * static_cast<double>(nref);
    miss_t += len * static_cast<double>(nref > nhyp ? nref - nhyp : 0);
    fa_t += len * static_cast<double>(nhyp > nref ? nhyp - nref : 0);
    conf_t += len * static_cast<double>(std::min(nref, nhyp) - ncorrect);
  }

  DerReport rep;
  rep.scored_speech = scored_ref;
  if (scored_ref > 0.0) {
    rep.miss = miss_t / scored_ref;
    rep.false_alarm = fa_t / scored_ref;
    rep.confusion = conf_t / scored_ref;
    rep.der = rep.miss + rep.false_alarm + rep.confusion;
  }
  return rep;
}

}  // namespace tsvad
