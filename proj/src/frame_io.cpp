#include "edgesim/frame_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace edgesim {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_rows(std::ostream& out, const FsrFrame& frame) {
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      if (c) out << ',';
      out << format_double(frame.at(r, c));
    }
    out << '\n';
  }
}

}  // namespace

void write_frame_csv(std::ostream& out, const FsrFrame& frame) {
  out << "t_ms=" << frame.t_ms << '\n';
  write_rows(out, frame);
}

void write_frames_csv(const std::filesystem::path& path, const std::vector<FsrFrame>& frames) {
  auto out = open_out(path);
  for (const auto& f : frames) write_frame_csv(out, f);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<FsrFrame> read_frames_csv(std::istream& in, const std::string& source) {
  std::vector<FsrFrame> frames;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw FormatError(source + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("t_ms=", 0) != 0) fail("expected header 't_ms=<int>'");
    FsrFrame frame;
    const char* b = line.data() + 5;
    const char* e = line.data() + line.size();
    auto [p, ec] = std::from_chars(b, e, frame.t_ms);
    if (ec != std::errc{} || p != e) fail("bad timestamp in header");
    for (int r = 0; r < kGridSize; ++r) {
      if (!std::getline(in, line)) {
        ++lineno;
        fail("truncated frame: expected 6 rows, got " + std::to_string(r));
      }
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const char* q = line.data();
      const char* end = line.data() + line.size();
      for (int c = 0; c < kGridSize; ++c) {
        double v = 0;
        auto [next, err] = std::from_chars(q, end, v);
        if (err != std::errc{}) fail("row " + std::to_string(r) + " column " + std::to_string(c) + ": not a number");
        if (!std::isfinite(v) || v < 0) fail("row " + std::to_string(r) + " column " + std::to_string(c) + ": negative or non-finite cell");
        frame.at(r, c) = v;
        q = next;
        if (c + 1 < kGridSize) {
          if (q == end || *q != ',') fail("row " + std::to_string(r) + ": expected 6 comma-separated values");
          ++q;
        }
      }
      if (q != end) fail("row " + std::to_string(r) + ": trailing data");
    }
    frames.push_back(frame);
  }
  return frames;
}

std::vector<FsrFrame> read_frames_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_frames_csv(in, path.string());
}

void write_heatmap_csv(const std::filesystem::path& path, const FsrFrame& frame) {
  auto out = open_out(path);
  write_rows(out, frame);
}

void write_heatmap_pgm(const std::filesystem::path& path, const FsrFrame& frame) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "P5\n" << kGridSize << ' ' << kGridSize << "\n255\n";
  const double peak = *std::max_element(frame.cells.begin(), frame.cells.end());
  for (double v : frame.cells) {
    const double scaled = peak > 0 ? std::round(255.0 * v / peak) : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0))));
  }
}

FsrFrame mean_frame(const std::vector<FsrFrame>& frames) {
  FsrFrame mean;
  if (frames.empty()) return mean;
  for (const auto& f : frames) {
    for (int i = 0; i < kCellCount; ++i) mean.cells[i] += f.cells[i];
  }
  for (auto& v : mean.cells) v /= static_cast<double>(frames.size());
  mean.t_ms = frames.back().t_ms;
  return mean;
}

}  // namespace edgesim
