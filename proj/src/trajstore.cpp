#include "spedge/trajstore.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "json.hpp"

namespace spedge {

namespace {

template <class T>
void put_le(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  out.append(b, sizeof(T));
}

template <class T>
T get_le(const char* p) {
  char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void put_scalar(std::string& out, double v, std::uint8_t width) {
  if (width == 4)
    put_le<float>(out, static_cast<float>(v));
  else
    put_le<double>(out, v);
}

double get_scalar(const char* p, std::uint8_t width) {
  return width == 4 ? static_cast<double>(get_le<float>(p)) : get_le<double>(p);
}

std::string offset_str(std::uint64_t off) { return "byte offset " + std::to_string(off); }

}  // namespace

void validate_header(const StreamHeader& h) {
  if (h.version != kStreamVersion)
    throw Error(ErrorCode::format, "unsupported stream version " + std::to_string(h.version));
  if (h.p < 1) throw Error(ErrorCode::format, "stream header declares p = 0");
  if (h.scalar_width != 4 && h.scalar_width != 8)
    throw Error(ErrorCode::format,
                "scalar width must be 4 or 8, got " + std::to_string(h.scalar_width));
  if (h.step_stride < 1) throw Error(ErrorCode::format, "step stride must be >= 1");
}

std::string encode_header(const StreamHeader& h) {
  validate_header(h);
  std::string out(kStreamMagic, 8);
  put_le<std::uint32_t>(out, h.version);
  put_le<std::uint64_t>(out, h.p);
  put_le<std::uint8_t>(out, h.scalar_width);
  put_le<std::uint8_t>(out, h.has_losses ? 1 : 0);
  put_le<std::uint32_t>(out, h.step_stride);
  return out;
}

StreamHeader decode_header(const char* bytes, std::size_t n) {
  if (n < kHeaderBytes) throw Error(ErrorCode::format, "file shorter than the stream header");
  if (std::memcmp(bytes, kStreamMagic, 8) != 0)
    throw Error(ErrorCode::format, "bad magic: not a SPEDGE01 stream");
  StreamHeader h;
  h.version = get_le<std::uint32_t>(bytes + 8);
  h.p = get_le<std::uint64_t>(bytes + 12);
  h.scalar_width = get_le<std::uint8_t>(bytes + 20);
  const auto hl = get_le<std::uint8_t>(bytes + 21);
  if (hl > 1) throw Error(ErrorCode::format, "has_losses byte must be 0 or 1");
  h.has_losses = hl == 1;
  h.step_stride = get_le<std::uint32_t>(bytes + 22);
  validate_header(h);
  return h;
}

std::string encode_record(const StreamHeader& h, const UpdateRecord& rec) {
  if (rec.delta.size() != h.p)
    throw Error(ErrorCode::argument, "record at step " + std::to_string(rec.step) + " has length " +
                                         std::to_string(rec.delta.size()) + ", stream p is " +
                                         std::to_string(h.p));
  std::string out;
  out.reserve(h.record_bytes());
  put_le<std::uint64_t>(out, rec.step);
  if (h.has_losses) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    put_scalar(out, rec.train_loss.value_or(nan), h.scalar_width);
    put_scalar(out, rec.val_loss.value_or(nan), h.scalar_width);
  }
  for (double v : rec.delta) {
    if (!std::isfinite(v))
      throw Error(ErrorCode::argument,
                  "non-finite component in record at step " + std::to_string(rec.step));
    put_scalar(out, v, h.scalar_width);
  }
  return out;
}

// ---------------------------------------------------------------- reader

StreamReader::StreamReader(const std::string& path) : path_(path) {
  in_.open(path, std::ios::binary);
  if (!in_) throw Error(ErrorCode::io, "cannot open " + path);
  in_.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);
  char hb[kHeaderBytes];
  const std::size_t got = size < kHeaderBytes ? static_cast<std::size_t>(size) : kHeaderBytes;
  in_.read(hb, static_cast<std::streamsize>(got));
  header_ = decode_header(hb, got);

  const std::uint64_t rb = header_.record_bytes();
  const std::uint64_t body = size - kHeaderBytes;
  count_ = static_cast<std::size_t>(body / rb);
  const std::uint64_t rem = body % rb;
  if (rem != 0) {
    const std::uint64_t off = kHeaderBytes + count_ * rb;
    std::string which = "record " + std::to_string(count_);
    if (rem >= 8) {
      char sb[8];
      in_.seekg(static_cast<std::streamoff>(off));
      in_.read(sb, 8);
      which = "step " + std::to_string(get_le<std::uint64_t>(sb));
    }
    throw Error(ErrorCode::corruption, "truncated record at " + offset_str(off) + " (" + which +
                                           ", " + std::to_string(rem) + " of " +
                                           std::to_string(rb) + " bytes present)");
  }
  // Steps must strictly increase; check up front so record(i) can seek freely.
  char sb[8];
  for (std::size_t i = 0; i < count_; ++i) {
    const std::uint64_t off = kHeaderBytes + i * rb;
    in_.seekg(static_cast<std::streamoff>(off));
    in_.read(sb, 8);
    const auto step = get_le<std::uint64_t>(sb);
    if (have_last_ && step <= last_step_)
      throw Error(ErrorCode::ordering, "non-monotone step " + std::to_string(step) + " after " +
                                           std::to_string(last_step_) + " at " + offset_str(off));
    last_step_ = step;
    have_last_ = true;
  }
  in_.clear();
}

UpdateRecord StreamReader::record(std::size_t i) {
  if (i >= count_) throw Error(ErrorCode::gap, "record index " + std::to_string(i) + " past end");
  const std::size_t rb = header_.record_bytes();
  const std::uint64_t off = kHeaderBytes + static_cast<std::uint64_t>(i) * rb;
  std::string buf(rb, '\0');
  in_.seekg(static_cast<std::streamoff>(off));
  in_.read(buf.data(), static_cast<std::streamsize>(rb));
  if (!in_) throw Error(ErrorCode::io, "read failed at " + offset_str(off) + " in " + path_);
  const std::uint8_t w = header_.scalar_width;
  UpdateRecord rec;
  const char* p = buf.data();
  rec.step = get_le<std::uint64_t>(p);
  p += 8;
  if (header_.has_losses) {
    const double tl = get_scalar(p, w), vl = get_scalar(p + w, w);
    if (!std::isnan(tl)) rec.train_loss = tl;
    if (!std::isnan(vl)) rec.val_loss = vl;
    p += 2 * w;
  }
  rec.delta.resize(header_.p);
  for (std::size_t j = 0; j < header_.p; ++j, p += w) {
    rec.delta[j] = get_scalar(p, w);
    if (!std::isfinite(rec.delta[j]))
      throw Error(ErrorCode::corruption, "non-finite component " + std::to_string(j) +
                                             " in step " + std::to_string(rec.step) + " at " +
                                             offset_str(off));
  }
  return rec;
}

bool StreamReader::next(UpdateRecord& out) {
  if (cursor_ >= count_) return false;
  out = record(cursor_++);
  return true;
}

// ---------------------------------------------------------------- writer

StreamWriter::StreamWriter(const std::string& path, const StreamHeader& header)
    : header_(header) {
  const std::string hb = encode_header(header);
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::io, "cannot write " + path);
  out_.write(hb.data(), static_cast<std::streamsize>(hb.size()));
}

void StreamWriter::append(const UpdateRecord& rec) {
  if (have_last_ && rec.step <= last_step_)
    throw Error(ErrorCode::ordering, "non-monotone step " + std::to_string(rec.step) + " after " +
                                         std::to_string(last_step_));
  const std::string rb = encode_record(header_, rec);
  out_.write(rb.data(), static_cast<std::streamsize>(rb.size()));
  if (!out_) throw Error(ErrorCode::io, "write failed");
  last_step_ = rec.step;
  have_last_ = true;
}

void StreamWriter::close() {
  if (out_.is_open()) {
    out_.flush();
    if (!out_) throw Error(ErrorCode::io, "flush failed");
    out_.close();
  }
}

StreamWriter::~StreamWriter() {
  if (out_.is_open()) out_.close();
}

UpdateStream read_stream(const std::string& path) {
  StreamReader r(path);
  UpdateStream s;
  s.header = r.header();
  s.records.reserve(r.count());
  UpdateRecord rec;
  while (r.next(rec)) s.records.push_back(std::move(rec));
  return s;
}

void write_stream(const std::string& path, const UpdateStream& s) {
  StreamWriter w(path, s.header);
  for (const auto& r : s.records) w.append(r);
  w.close();
}

UpdateStream read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::format, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.contains("p") || !j["p"].is_number_unsigned() || !j.contains("files") ||
      !j["files"].is_array())
    throw Error(ErrorCode::format, "manifest needs an unsigned \"p\" and a \"files\" array");
  UpdateStream s;
  s.header.p = j["p"].get<std::uint64_t>();
  s.header.scalar_width = static_cast<std::uint8_t>(j.value("scalar_width", 8));
  s.header.step_stride = j.value("step_stride", 1u);
  validate_header(s.header);
  const auto base = std::filesystem::path(path).parent_path();
  const std::size_t w = s.header.scalar_width;
  const std::size_t expect = static_cast<std::size_t>(s.header.p) * w;
  std::uint64_t ordinal = 0;
  for (const auto& f : j["files"]) {
    std::filesystem::path fp = f.get<std::string>();
    if (fp.is_relative()) fp = base / fp;
    std::ifstream fin(fp, std::ios::binary);
    if (!fin) throw Error(ErrorCode::io, "cannot open " + fp.string());
    std::string buf((std::istreambuf_iterator<char>(fin)), std::istreambuf_iterator<char>());
    if (buf.size() != expect)
      throw Error(ErrorCode::corruption, fp.string() + " holds " + std::to_string(buf.size()) +
                                             " bytes, expected " + std::to_string(expect));
    UpdateRecord rec;
    rec.step = ordinal * s.header.step_stride;
    rec.delta.resize(s.header.p);
    for (std::size_t k = 0; k < s.header.p; ++k) {
      rec.delta[k] = get_scalar(buf.data() + k * w, static_cast<std::uint8_t>(w));
      if (!std::isfinite(rec.delta[k]))
        throw Error(ErrorCode::corruption, "non-finite component in " + fp.string());
    }
    s.records.push_back(std::move(rec));
    ++ordinal;
  }
  return s;
}

UpdateStream load_any(const std::string& path) {
  if (std::filesystem::path(path).extension() == ".json") return read_manifest(path);
  return read_stream(path);
}

// ---------------------------------------------------------------- windows

TrajectoryWindow window_at(const UpdateStream& s, std::int64_t t0, std::size_t W) {
  if (W < 2) throw Error(ErrorCode::argument, "window size must be >= 2");
  if (t0 < 0) throw Error(ErrorCode::argument, "window start must be >= 0");
  const auto end = static_cast<std::size_t>(t0) + W;
  if (end > s.size())
    throw Error(ErrorCode::gap, "window [" + std::to_string(t0) + ", " + std::to_string(end) +
                                    ") needs records past the end of a " +
                                    std::to_string(s.size()) + "-record stream");
  TrajectoryWindow w;
  w.t0 = t0;
  w.W = W;
  w.p = s.p();
  w.stride = s.header.step_stride;
  for (std::size_t i = static_cast<std::size_t>(t0); i < end; ++i) {
    w.steps.push_back(s.records[i].step);
    w.rows.push_back(s.records[i].delta);
  }
  return w;
}

TrajectoryWindow make_window(const std::vector<Vec>& rows, std::int64_t t0) {
  if (rows.size() < 2) throw Error(ErrorCode::argument, "window size must be >= 2");
  TrajectoryWindow w;
  w.t0 = t0;
  w.W = rows.size();
  w.p = rows[0].size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != w.p) throw Error(ErrorCode::argument, "ragged window rows");
    w.steps.push_back(static_cast<std::uint64_t>(t0) + i);
  }
  w.rows = rows;
  return w;
}

SlideResult slide(const TrajectoryWindow& w, const UpdateRecord& next) {
  const std::uint64_t want = w.steps.back() + w.stride;
  if (next.step != want)
    throw Error(ErrorCode::ordering, "slide expects step " + std::to_string(want) + ", got " +
                                         std::to_string(next.step));
  if (next.delta.size() != w.p) throw Error(ErrorCode::argument, "entering row has wrong length");
  SlideResult r;
  r.exiting = w.rows.front();
  r.entering = next.delta;
  r.window.t0 = w.t0 + 1;
  r.window.W = w.W;
  r.window.p = w.p;
  r.window.stride = w.stride;
  r.window.steps.assign(w.steps.begin() + 1, w.steps.end());
  r.window.steps.push_back(next.step);
  r.window.rows.assign(w.rows.begin() + 1, w.rows.end());
  r.window.rows.push_back(next.delta);
  return r;
}

}  // namespace spedge
