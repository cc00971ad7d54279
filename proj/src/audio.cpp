// SPDX-License-Identifier: Apache-2.0
#include "stressdet/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stressdet {

namespace {

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

AudioSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file '" + path + "'");

  char tag[5] = {0};
  in.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0) {
    throw std::runtime_error("'" + path + "' is not a RIFF/WAVE file");
  }
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0) {
    throw std::runtime_error("'" + path + "' is not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<double> samples;
  bool got_fmt = false, got_data = false;
  while (in && !(got_fmt && got_data)) {
    in.read(tag, 4);
    if (!in) break;
    const std::uint32_t size = read_u32(in);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (size > 16) in.ignore(size - 16);
      got_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw std::runtime_error("'" + path + "': data before fmt chunk");
      if (format != 1 || bits != 16) {
        throw std::runtime_error("'" + path + "': expected 16-bit PCM, got format " +
                                 std::to_string(format) + " / " + std::to_string(bits) +
                                 " bits");
      }
      if (channels != 1) {
        throw std::runtime_error("'" + path + "': expected mono, got " +
                                 std::to_string(channels) + " channels; mix down first");
      }
      if (static_cast<int>(rate) != kRequiredSampleRate) {
        throw std::runtime_error("'" + path + "': sample rate " + std::to_string(rate) +
                                 " Hz; resample to 16000 Hz before feature extraction");
      }
      const std::size_t n = size / 2;
      samples.resize(n);
      std::vector<char> raw(size);
      in.read(raw.data(), static_cast<std::streamsize>(size));
      if (static_cast<std::uint32_t>(in.gcount()) != size) {
        throw std::runtime_error("'" + path + "': truncated data chunk");
      }
      for (std::size_t i = 0; i < n; ++i) {
        std::int16_t s;
        std::memcpy(&s, raw.data() + 2 * i, 2);
        samples[i] = static_cast<double>(s) / 32768.0;
      }
      got_data = true;
    } else {
      in.ignore(size + (size & 1));
    }
  }
  if (!got_data) throw std::runtime_error("'" + path + "': no data chunk");
  if (samples.empty()) throw std::runtime_error("'" + path + "': empty audio");
  return AudioSignal{std::move(samples), kRequiredSampleRate};
}

void write_wav(const AudioSignal& audio, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write WAV file '" + path + "'");
  const std::uint32_t data_size = static_cast<std::uint32_t>(audio.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(audio.sample_rate * 2));
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_size);
  for (double v : audio.samples) {
    const double clipped = std::clamp(v, -1.0, 1.0);
    const auto s = static_cast<std::int16_t>(std::lrint(clipped * 32767.0));
    char b[2] = {static_cast<char>(s & 0xff), static_cast<char>((s >> 8) & 0xff)};
    out.write(b, 2);
  }
  if (!out) throw std::runtime_error("short write to WAV file '" + path + "'");
}

}  // namespace stressdet
