#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "hsnd/error.hpp"
#include "hsnd/signal.hpp"

namespace hsnd {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF),
                     static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

bool tag_is(const std::uint8_t* p, const char* tag) {
  return std::memcmp(p, tag, 4) == 0;
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path.string());

  std::uint8_t riff[12];
  if (!in.read(reinterpret_cast<char*>(riff), 12))
    throw FormatError("wav: file too short for RIFF header: " + path.string());
  if (!tag_is(riff, "RIFF") || !tag_is(riff + 8, "WAVE"))
    throw FormatError("wav: not a RIFF/WAVE file: " + path.string());

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t chunk_header[8];
  while (in.read(reinterpret_cast<char*>(chunk_header), 8)) {
    const std::uint32_t size = read_u32(chunk_header + 4);
    if (tag_is(chunk_header, "fmt ")) {
      if (size < 16) throw FormatError("wav: fmt chunk too small");
      std::vector<std::uint8_t> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size))
        throw FormatError("wav: truncated fmt chunk");
      std::uint16_t format_tag = read_u16(fmt.data());
      channels = read_u16(fmt.data() + 2);
      sample_rate = read_u32(fmt.data() + 4);
      bits = read_u16(fmt.data() + 14);
      if (format_tag == kFormatExtensible && size >= 40)
        format_tag = read_u16(fmt.data() + 24);  // first two bytes of SubFormat
      if (format_tag != kFormatPcm || bits != 16)
        throw FormatError("wav: only PCM 16-bit is supported: " + path.string());
      if (channels == 0) throw FormatError("wav: zero channels");
      have_fmt = true;
    } else if (tag_is(chunk_header, "data")) {
      data.resize(size);
      if (!in.read(reinterpret_cast<char*>(data.data()), size))
        throw FormatError("wav: truncated data chunk");
    } else {
      in.seekg(size, std::ios::cur);
    }
    if (size % 2) in.seekg(1, std::ios::cur);  // chunk padding
  }

  if (!have_fmt) throw FormatError("wav: missing fmt chunk: " + path.string());
  if (data.empty()) throw FormatError("wav: missing or empty data chunk: " + path.string());
  if (data.size() % (2 * channels) != 0)
    throw FormatError("wav: data size is not a whole number of frames");

  const std::size_t frames = data.size() / (2 * channels);
  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.samples.resize(frames);
  const double scale = 1.0 / (32768.0 * channels);
  for (std::size_t f = 0; f < frames; ++f) {
    std::int32_t acc = 0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data.data() + 2 * (f * channels + c);
      acc += static_cast<std::int16_t>(read_u16(p));
    }
    clip.samples[f] = static_cast<float>(acc * scale);
  }
  clip.validate();
  return clip;
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path) {
  clip.validate();
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write wav file: " + path.string());

  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, kFormatPcm);
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  write_u16(out, 2);   // block align
  write_u16(out, 16);  // bits per sample
  out.write("data", 4);
  write_u32(out, data_size);

  const double max_val = 1.0 - std::ldexp(1.0, -15);
  for (float s : clip.samples) {
    const double clamped = std::clamp(static_cast<double>(s), -1.0, max_val);
    const auto q = static_cast<std::int16_t>(std::lround(clamped * 32768.0));
    write_u16(out, static_cast<std::uint16_t>(q));
  }
  if (!out) throw IoError("failed writing wav file: " + path.string());
}

}  // namespace hsnd
