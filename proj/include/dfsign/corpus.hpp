// dfsign/corpus.hpp

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

// Synthetic signer corpus. Each frame shows a head in the upper region and,
// while a gloss is being signed, a hand glyph moving through the lower
// region. Glosses 2k and 2k+1 share hand glyph k (shape and trajectory) and
// differ only in the mouth drawn on the face, so a gloss is identified only
// by the upper and lower regions together. Gap frames between glosses show
// the head with a neutral face and no hand.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dfsign/ctc.hpp"
#include "dfsign/error.hpp"
#include "dfsign/keyvalue.hpp"
#include "dfsign/random.hpp"
#include "dfsign/tensor.hpp"
#include "dfsign/tnsr.hpp"

namespace dfsign {

inline constexpr int kHandGlyphs = 8;

struct CorpusSpec {
  int vocab = 10;
  int train_videos = 200, dev_videos = 50, test_videos = 50;
  int glosses_min = 3, glosses_max = 5;
  int frames_min = 4, frames_max = 8;
  int gap_min = 0, gap_max = 2;
  int height = 48, width = 48;
  double ratio = 0.35;  // face/hand boundary, as a fraction of the height
  double noise = 0.15;  // background noise amplitude
  std::uint64_t seed = 1;

  void validate() const {
    auto range = [](const char* what, int lo, int hi, int min) {
      if (lo < min || hi < lo)
        throw ContractError(std::string("corpus spec: bad ") + what + " range [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
    };
    if (vocab < 1 || vocab > 2 * kHandGlyphs)
      throw ContractError("corpus spec: vocab must be in [1, " + std::to_string(2 * kHandGlyphs) + "]");
    range("glosses", glosses_min, glosses_max, 1);
    range("frames-per-gloss", frames_min, frames_max, 1);
    range("gap", gap_min, gap_max, 0);
    if (height < 16 || width < 16) throw ContractError("corpus spec: frames must be at least 16x16");
    if (train_videos < 0 || dev_videos < 0 || test_videos < 0)
      throw ContractError("corpus spec: negative video count");
    if (!(ratio > 0.1 && ratio < 0.6)) throw ContractError("corpus spec: ratio must be in (0.1, 0.6)");
  }

  static CorpusSpec from(const KeyValues& kv) {
    CorpusSpec s;
    s.vocab = kv.get("vocab", s.vocab);
    s.train_videos = kv.get("train_videos", s.train_videos);
    s.dev_videos = kv.get("dev_videos", s.dev_videos);
    s.test_videos = kv.get("test_videos", s.test_videos);
    s.glosses_min = kv.get("glosses_min", s.glosses_min);
    s.glosses_max = kv.get("glosses_max", s.glosses_max);
    s.frames_min = kv.get("frames_min", s.frames_min);
    s.frames_max = kv.get("frames_max", s.frames_max);
    s.gap_min = kv.get("gap_min", s.gap_min);
    s.gap_max = kv.get("gap_max", s.gap_max);
    s.height = kv.get("height", s.height);
    s.width = kv.get("width", s.width);
    s.ratio = kv.get("ratio", s.ratio);
    s.noise = kv.get("noise", s.noise);
    s.seed = kv.get("seed", s.seed);
    s.validate();
    return s;
  }

  KeyValues to_kv() const {
    KeyValues kv;
    auto put = [&](const char* k, auto v) {
      std::ostringstream os;
      os << v;
      kv.set(k, os.str());
    };
    put("vocab", vocab);
    put("train_videos", train_videos);
    put("dev_videos", dev_videos);
    put("test_videos", test_videos);
    put("glosses_min", glosses_min);
    put("glosses_max", glosses_max);
    put("frames_min", frames_min);
    put("frames_max", frames_max);
    put("gap_min", gap_min);
    put("gap_max", gap_max);
    put("height", height);
    put("width", width);
    kv.set("ratio", format_double(ratio));
    kv.set("noise", format_double(noise));
    put("seed", seed);
    return kv;
  }

  static std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }
};

struct Video {
  std::string id;
  GlossSequence glosses;
  Tensor frames;  // [T, 3, H, W], values in [0, 1]
};

struct Split {
  std::string name;
  std::vector<Video> videos;
};

struct Corpus {
  CorpusSpec spec;
  std::vector<Split> splits;  // train, dev, test

  const Split& split(const std::string& name) const {
    for (const auto& s : splits)
      if (s.name == name) return s;
    throw DataError("corpus has no split named '" + name + "'");
  }
};

namespace render {

struct Point {
  double y, x;
};

/// Whether (u, v) in [-1, 1]^2 lies inside hand glyph `k`.
inline bool hand_shape(int k, double u, double v) {
  const double m = std::max(std::abs(u), std::abs(v));
  if (m > 1.0) return false;
  switch (k) {
    case 0: return true;                                          // square
    case 1: return std::abs(u) <= 0.35 || std::abs(v) <= 0.35;    // plus
    case 2: { const double r = std::hypot(u, v); return r >= 0.5 && r <= 1.0; }  // ring
    case 3: return std::abs(std::abs(u) - std::abs(v)) <= 0.4;    // cross
    case 4: return std::abs(u) <= (v + 1.0) / 2.0;                // triangle
    case 5: return int(std::floor((v + 1.0) * 2.0)) % 2 == 0;     // horizontal bars
    case 6: return int(std::floor((u + 1.0) * 2.0)) % 2 == 0;     // vertical bars
    default: return std::abs(u) + std::abs(v) <= 1.0;             // diamond
  }
}

/// Start and end of hand glyph k's trajectory in the unit square of the
/// lower region (y = 0 touches the face boundary).
inline std::pair<Point, Point> hand_path(int k) {
  static constexpr double p[kHandGlyphs][4] = {
      {0.5, 0.2, 0.5, 0.8},  // left to right
      {0.9, 0.5, 0.0, 0.5},  // rising up to the face
      {0.3, 0.8, 0.3, 0.2},  // right to left
      {0.9, 0.2, 0.0, 0.8},  // diagonal towards the face
      {0.0, 0.3, 0.0, 0.7},  // along the face boundary
      {0.9, 0.8, 0.9, 0.2},  // low, right to left
      {0.1, 0.1, 0.9, 0.1},  // falling on the left
      {0.1, 0.9, 0.9, 0.9},  // falling on the right
  };
  return {{p[k][0], p[k][1]}, {p[k][2], p[k][3]}};
}

struct Layout {
  int height, width, face_rows;
  double hand_radius;
  Point face_center;
  double face_radius;

  explicit Layout(const CorpusSpec& s)
      : height(s.height),
        width(s.width),
        face_rows(int(std::floor(s.ratio * s.height + 1e-9))),
        hand_radius(std::max(2.0, s.height / 10.0)),
        face_center{face_rows / 2.0, s.width / 2.0},
        face_radius(face_rows * 0.42) {}

  /// Pixel centre of the hand for a position in the lower-region unit square.
  Point hand_pixel(Point p) const {
    const double top = face_rows + hand_radius + 1, bottom = height - hand_radius - 1;
    const double left = hand_radius + 1, right = width - hand_radius - 1;
    return {top + p.y * (bottom - top), left + p.x * (right - left)};
  }
};

inline void put(Tensor& frame, int c, int y, int x, float v, const Layout& l) {
  if (y < 0 || x < 0 || y >= l.height || x >= l.width) return;
  frame.at(std::size_t(c), std::size_t(y), std::size_t(x)) = v;
}

/// Head disc with eyes; mouth variant -1 draws a neutral face.
inline void draw_face(Tensor& frame, const Layout& l, int mouth, Point jitter) {
  static constexpr float skin[3] = {0.75f, 0.55f, 0.45f};
  const double cy = l.face_center.y + jitter.y, cx = l.face_center.x + jitter.x, r = l.face_radius;
  for (int y = int(cy - r) - 1; y <= int(cy + r) + 1; ++y)
    for (int x = int(cx - r) - 1; x <= int(cx + r) + 1; ++x)
      if (std::hypot(y - cy, x - cx) <= r && y < l.face_rows)
        for (int c = 0; c < 3; ++c) put(frame, c, y, x, skin[c], l);
  const int ey = int(std::lround(cy - r * 0.3)), ex = int(std::lround(r * 0.4));
  for (int c = 0; c < 3; ++c) {
    put(frame, c, ey, int(std::lround(cx)) - ex, 0.05f, l);
    put(frame, c, ey, int(std::lround(cx)) + ex, 0.05f, l);
  }
  const int my = int(std::lround(cy + r * 0.45)), mx = int(std::lround(cx));
  auto dark = [&](int y, int x) {
    if (y < l.face_rows)
      for (int c = 0; c < 3; ++c) put(frame, c, y, x, 0.05f, l);
  };
  const int half = std::max(1, int(std::lround(r * 0.45)));
  if (mouth == 0) {
    for (int dx = -half; dx <= half; ++dx) dark(my, mx + dx);  // closed: a wide line
  } else if (mouth == 1) {
    static constexpr float lips[3] = {0.95f, 0.1f, 0.1f};
    for (int dy = -2; dy <= 0; ++dy)  // open: a red block
      for (int dx = -2; dx <= 2; ++dx)
        if (my + dy < l.face_rows)
          for (int c = 0; c < 3; ++c) put(frame, c, my + dy, mx + dx, lips[c], l);
  }
}

inline void draw_hand(Tensor& frame, const Layout& l, int glyph, Point center) {
  static constexpr float palette[kHandGlyphs][3] = {
      {0.95f, 0.95f, 0.95f}, {0.95f, 0.2f, 0.2f}, {0.2f, 0.95f, 0.2f}, {0.2f, 0.2f, 0.95f},
      {0.95f, 0.95f, 0.2f},  {0.95f, 0.2f, 0.95f}, {0.2f, 0.95f, 0.95f}, {0.95f, 0.6f, 0.2f}};
  const double r = l.hand_radius;
  for (int y = int(center.y - r) - 1; y <= int(center.y + r) + 1; ++y)
    for (int x = int(center.x - r) - 1; x <= int(center.x + r) + 1; ++x) {
      const double v = (y - center.y) / r, u = (x - center.x) / r;
      if (hand_shape(glyph, u, v))
        for (int c = 0; c < 3; ++c) put(frame, c, y, x, palette[glyph][c], l);
    }
}

}  // namespace render

/// Hand glyph shared by glosses 2k and 2k+1.
inline int hand_glyph(int gloss) { return gloss / 2; }
/// Mouth variant that tells the pair apart.
inline int mouth_variant(int gloss) { return gloss % 2; }

/// Renders one video for a gloss sequence. Consumes `rng` deterministically.
inline Video render_video(const CorpusSpec& spec, std::string id, const GlossSequence& glosses,
                          std::mt19937_64& rng) {
  const render::Layout layout(spec);
  struct FrameDesc {
    int gloss;  // -1 for a gap frame
    render::Point hand;
  };
  std::vector<FrameDesc> desc;
  auto gap = [&] {
    for (int n = uniform_int(rng, spec.gap_min, spec.gap_max); n > 0; --n) desc.push_back({-1, {0, 0}});
  };
  gap();
  for (int g : glosses) {
    const int n = uniform_int(rng, spec.frames_min, spec.frames_max);
    auto [a, b] = render::hand_path(hand_glyph(g));
    const double j = 0.08;
    a = {std::clamp(a.y + uniform(rng, -j, j), 0.0, 1.0), std::clamp(a.x + uniform(rng, -j, j), 0.0, 1.0)};
    b = {std::clamp(b.y + uniform(rng, -j, j), 0.0, 1.0), std::clamp(b.x + uniform(rng, -j, j), 0.0, 1.0)};
    for (int f = 0; f < n; ++f) {
      const double s = n == 1 ? 0.5 : double(f) / double(n - 1);
      desc.push_back({g, layout.hand_pixel({a.y + s * (b.y - a.y), a.x + s * (b.x - a.x)})});
    }
    gap();
  }
  // the pipeline needs at least two frames
  while (desc.size() < 2) desc.push_back({-1, {0, 0}});

  const std::size_t T = desc.size(), H = std::size_t(spec.height), W = std::size_t(spec.width);
  Tensor frames({T, 3, H, W});
  const render::Point face_jitter{uniform(rng, -1, 1), uniform(rng, -1, 1)};
  for (std::size_t t = 0; t < T; ++t) {
    Tensor frame({3, H, W});
    for (auto& v : frame.storage()) v = float(uniform(rng, 0.0, spec.noise));
    render::draw_face(frame, layout, desc[t].gloss < 0 ? -1 : mouth_variant(desc[t].gloss), face_jitter);
    if (desc[t].gloss >= 0) render::draw_hand(frame, layout, hand_glyph(desc[t].gloss), desc[t].hand);
    std::copy(frame.storage().begin(), frame.storage().end(), frames.storage().begin() + t * frame.size());
  }
  return {std::move(id), glosses, std::move(frames)};
}

/// Random gloss sequence without adjacent repeats.
inline GlossSequence random_glosses(const CorpusSpec& spec, std::mt19937_64& rng) {
  GlossSequence g;
  const int n = uniform_int(rng, spec.glosses_min, spec.glosses_max);
  while (int(g.size()) < n) {
    const int x = uniform_int(rng, 0, spec.vocab - 1);
    if (g.empty() || x != g.back() || spec.vocab == 1) g.push_back(x);
  }
  return g;
}

inline Split generate_split(const CorpusSpec& spec, const std::string& name, int count, std::uint64_t stream) {
  std::mt19937_64 rng(spec.seed * 1000003ULL + stream);
  Split s{name, {}};
  for (int i = 0; i < count; ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04d", name.c_str(), i);
    auto glosses = random_glosses(spec, rng);
    s.videos.push_back(render_video(spec, id, glosses, rng));
  }
  return s;
}

inline Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  return {spec,
          {generate_split(spec, "train", spec.train_videos, 1), generate_split(spec, "dev", spec.dev_videos, 2),
           generate_split(spec, "test", spec.test_videos, 3)}};
}

// ---------------------------------------------------------------------------
// On-disk layout:
//   manifest.txt          spec plus video counts (key = value)
//   <split>.tsv           video_id TAB space-joined gloss indices
//   <split>/<id>.tnsr     frames [T, 3, H, W]

inline void write_annotations(std::ostream& os, const Split& s) {
  for (const auto& v : s.videos) {
    os << v.id << '\t';
    for (std::size_t i = 0; i < v.glosses.size(); ++i) os << (i ? " " : "") << v.glosses[i];
    os << '\n';
  }
}

inline std::vector<std::pair<std::string, GlossSequence>> read_annotations(std::istream& in,
                                                                           const std::string& source) {
  std::vector<std::pair<std::string, GlossSequence>> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw DataError(source + ":" + std::to_string(n) + ": expected `video_id TAB glosses`");
    GlossSequence g;
    std::istringstream ss(line.substr(tab + 1));
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t pos = 0;
        g.push_back(std::stoi(tok, &pos));
        if (pos != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DataError(source + ":" + std::to_string(n) + ": bad gloss token '" + tok + "'");
      }
    }
    out.emplace_back(line.substr(0, tab), std::move(g));
  }
  return out;
}

inline void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto kv = c.spec.to_kv();
  for (const auto& s : c.splits) kv.set("videos." + s.name, std::to_string(s.videos.size()));
  {
    std::ofstream m(dir / "manifest.txt");
    if (!m) throw IoError("cannot write " + (dir / "manifest.txt").string());
    kv.write(m);
  }
  for (const auto& s : c.splits) {
    fs::create_directories(dir / s.name, ec);
    if (ec) throw IoError("cannot create " + (dir / s.name).string() + ": " + ec.message());
    std::ofstream a(dir / (s.name + ".tsv"));
    if (!a) throw IoError("cannot write " + (dir / (s.name + ".tsv")).string());
    write_annotations(a, s);
    for (const auto& v : s.videos) tnsr::write((dir / s.name / (v.id + ".tnsr")).string(), v.frames);
  }
}

inline Split read_split(const std::filesystem::path& dir, const std::string& name) {
  std::ifstream a(dir / (name + ".tsv"));
  if (!a) throw IoError("cannot open " + (dir / (name + ".tsv")).string());
  Split s{name, {}};
  for (auto& [id, glosses] : read_annotations(a, (dir / (name + ".tsv")).string())) {
    auto frames = tnsr::read((dir / name / (id + ".tnsr")).string());
    if (frames.rank() != 4 || frames.dim(1) != 3)
      throw DataError(id + ": expected frames [T,3,H,W], got " + shape_str(frames.shape()));
    s.videos.push_back({id, std::move(glosses), std::move(frames)});
  }
  return s;
}

inline CorpusSpec read_corpus_spec(const std::filesystem::path& dir) {
  auto kv = KeyValues::load((dir / "manifest.txt").string());
  return CorpusSpec::from(kv);
}

/// Loads the named splits (all three by default).
inline Corpus read_corpus(const std::filesystem::path& dir,
                          const std::vector<std::string>& names = {"train", "dev", "test"}) {
  Corpus c{read_corpus_spec(dir), {}};
  for (const auto& n : names) c.splits.push_back(read_split(dir, n));
  return c;
}

}  // namespace dfsign
