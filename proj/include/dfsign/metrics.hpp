// dfsign/metrics.hpp

// Copyright 2026 The dfsign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dfsign/ctc.hpp"
#include "dfsign/error.hpp"

namespace dfsign {

struct EditStats {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  EditStats& operator+=(const EditStats& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_len += o.ref_len;
    return *this;
  }
  friend bool operator==(const EditStats&, const EditStats&) = default;
};

/// Minimal unit-cost alignment of hypothesis against reference. Among
/// minimal alignments the backtrace prefers the diagonal (match or
/// substitution), then deletion, then insertion.
inline EditStats edit_alignment(const GlossSequence& ref, const GlossSequence& hyp) {
  if (ref.empty()) throw UndefinedWerError("WER undefined for an empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});
  EditStats s;
  s.ref_len = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1])) {
      s.substitutions += ref[i - 1] != hyp[j - 1];
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++s.deletions;
      --i;
    } else {
      ++s.insertions;
      --j;
    }
  }
  return s;
}

/// Percentage; may exceed 100.
inline double wer(const EditStats& s) {
  if (s.ref_len == 0) throw UndefinedWerError("WER undefined for an empty reference");
  return 100.0 * double(s.errors()) / double(s.ref_len);
}

/// Pooled over the corpus: total errors over total reference length.
inline double corpus_wer(const std::vector<std::pair<GlossSequence, GlossSequence>>& pairs) {
  EditStats total;
  for (const auto& [ref, hyp] : pairs) total += edit_alignment(ref, hyp);
  return wer(total);
}

struct WerRow {
  std::string video_id;
  EditStats stats;
};

struct WerReport {
  std::vector<WerRow> rows;

  EditStats total() const {
    EditStats t;
    for (const auto& r : rows) t += r.stats;
    return t;
  }
  double corpus_wer() const { return rows.empty() ? 0.0 : wer(total()); }
};

/// TSV: video_id ref_len S D I wer, then a pooled TOTAL line.
inline void write_wer_report(std::ostream& os, const WerReport& rep) {
  auto line = [&](const std::string& id, const EditStats& s) {
    os << id << '\t' << s.ref_len << '\t' << s.substitutions << '\t' << s.deletions << '\t'
       << s.insertions << '\t' << std::fixed << std::setprecision(4) << wer(s) << '\n';
  };
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << "video_id\tref_len\tS\tD\tI\twer\n";
  for (const auto& r : rep.rows) line(r.video_id, r.stats);
  if (!rep.rows.empty()) line("TOTAL", rep.total());
  os.flags(flags);
  os.precision(prec);
}

}  // namespace dfsign
