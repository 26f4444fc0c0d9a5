#pragma once

// Frame CSV: a header line `t_ms=<int>` followed by six rows of six
// comma-separated cell values, row-major. A corpus file is any number of
// such blocks back to back.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgesim/device_sim.hpp"

namespace edgesim {

/// Malformed input file; the message names the file position.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_frame_csv(std::ostream& out, const FsrFrame& frame);
void write_frames_csv(const std::filesystem::path& path, const std::vector<FsrFrame>& frames);

std::vector<FsrFrame> read_frames_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<FsrFrame> read_frames_csv(const std::filesystem::path& path);

/// Six lines of six values, no header.
void write_heatmap_csv(const std::filesystem::path& path, const FsrFrame& frame);

/// Binary PGM (P5), one 8-bit pixel per cell, scaled so the largest cell is 255.
void write_heatmap_pgm(const std::filesystem::path& path, const FsrFrame& frame);

/// Cell-wise mean of a set of frames; t_ms is that of the last frame.
FsrFrame mean_frame(const std::vector<FsrFrame>& frames);

}  // namespace edgesim
