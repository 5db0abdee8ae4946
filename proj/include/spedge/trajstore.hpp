#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include "spedge/common.hpp"

namespace spedge {

inline constexpr char kStreamMagic[8] = {'S', 'P', 'E', 'D', 'G', 'E', '0', '1'};
inline constexpr std::uint32_t kStreamVersion = 1;
inline constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 1 + 1 + 4;

struct StreamHeader {
  std::uint32_t version = kStreamVersion;
  std::uint64_t p = 0;
  std::uint8_t scalar_width = 8;  // 4 or 8
  bool has_losses = false;
  std::uint32_t step_stride = 1;

  std::size_t record_bytes() const {
    return 8 + (has_losses ? 2 * scalar_width : 0) + static_cast<std::size_t>(p) * scalar_width;
  }
};

struct UpdateRecord {
  std::uint64_t step = 0;
  Vec delta;
  std::optional<double> train_loss;
  std::optional<double> val_loss;
};

// In-memory stream. Logical index of a record is its ordinal; `step` is the
// physical step kept as metadata.
struct UpdateStream {
  StreamHeader header;
  std::vector<UpdateRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t p() const { return static_cast<std::size_t>(header.p); }
};

// Single-reader handle over a stream file. Records have fixed size, so
// record(i) seeks directly.
class StreamReader {
 public:
  explicit StreamReader(const std::string& path);

  const StreamHeader& header() const { return header_; }
  std::size_t count() const { return count_; }
  UpdateRecord record(std::size_t i);
  // Sequential access; returns false at end of stream.
  bool next(UpdateRecord& out);

 private:
  std::string path_;
  std::ifstream in_;
  StreamHeader header_;
  std::size_t count_ = 0;
  std::size_t cursor_ = 0;
  std::uint64_t last_step_ = 0;
  bool have_last_ = false;
};

class StreamWriter {
 public:
  StreamWriter(const std::string& path, const StreamHeader& header);
  void append(const UpdateRecord& rec);
  void close();
  ~StreamWriter();

 private:
  std::ofstream out_;
  StreamHeader header_;
  std::uint64_t last_step_ = 0;
  bool have_last_ = false;
};

void validate_header(const StreamHeader& h);
std::string encode_header(const StreamHeader& h);
StreamHeader decode_header(const char* bytes, std::size_t n);
std::string encode_record(const StreamHeader& h, const UpdateRecord& rec);

UpdateStream read_stream(const std::string& path);
void write_stream(const std::string& path, const UpdateStream& s);

// JSON manifest {"p": N, "files": [...], "scalar_width": 4|8}; each file holds
// p raw little-endian scalars for one step. Relative paths resolve against
// the manifest's directory.
UpdateStream read_manifest(const std::string& path);

// Reads either format, dispatching on the ".json" extension.
UpdateStream load_any(const std::string& path);

struct TrajectoryWindow {
  std::int64_t t0 = 0;  // logical index of the first row
  std::size_t W = 0, p = 0;
  std::uint32_t stride = 1;
  std::vector<std::uint64_t> steps;  // physical steps, one per row
  std::vector<Vec> rows;
};

TrajectoryWindow window_at(const UpdateStream& s, std::int64_t t0, std::size_t W);
TrajectoryWindow make_window(const std::vector<Vec>& rows, std::int64_t t0 = 0);

struct SlideResult {
  TrajectoryWindow window;
  Vec exiting;
  Vec entering;
};

SlideResult slide(const TrajectoryWindow& w, const UpdateRecord& next);

}  // namespace spedge
