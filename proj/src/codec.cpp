#include "cstore/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cstore/rng.hpp"

namespace cstore::codec {

namespace {

void put_uvarint(Bytes& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

// LEB128, rejecting overlong forms so every value has exactly one encoding.
std::uint64_t get_uvarint(ByteView in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int shift = 0, i = 0; i < 10; ++i, shift += 7) {
    if (pos >= in.size()) throw PayloadError("truncated varint");
    std::uint8_t b = in[pos++];
    if (i == 9 && b > 1) throw PayloadError("varint overflow");
    v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
    if ((b & 0x80) == 0) {
      if (b == 0 && i > 0) throw PayloadError("overlong varint");
      return v;
    }
  }
  throw PayloadError("varint too long");
}

std::uint64_t zigzag(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

std::int64_t unzigzag(std::uint64_t v) {
  return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
}

// Runs of (length, value); adjacent runs always differ in value.
void rle_encode(const std::vector<int>& values, Bytes& out) {
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i + 1;
    while (j < values.size() && values[j] == values[i]) ++j;
    put_uvarint(out, j - i);
    put_uvarint(out, zigzag(values[i]));
    i = j;
  }
}

std::vector<int> rle_decode(ByteView in, std::size_t count) {
  std::vector<int> values;
  values.reserve(count);
  std::size_t pos = 0;
  bool have_prev = false;
  std::int64_t prev = 0;
  while (values.size() < count) {
    std::uint64_t run = get_uvarint(in, pos);
    if (run == 0) throw PayloadError("zero-length run");
    if (run > count - values.size()) throw PayloadError("run overflows frame");
    std::int64_t v = unzigzag(get_uvarint(in, pos));
    if (have_prev && v == prev) throw PayloadError("non-canonical split run");
    if (v < -255 || v > 255) throw PayloadError("coded value out of range");
    values.insert(values.end(), run, static_cast<int>(v));
    prev = v;
    have_prev = true;
  }
  if (pos != in.size()) throw PayloadError("trailing bytes after frame");
  return values;
}

int round_div(int r, int q) {
  return r >= 0 ? (r + q / 2) / q : -((-r + q / 2) / q);
}

void require_quantizer(std::uint32_t quantizer) {
  if (quantizer < 1 || quantizer > 255) throw CodecError("quantizer must be in [1, 255]");
}

}  // namespace

Frame::Frame(std::uint32_t w, std::uint32_t h) : width(w), height(h), samples(pixel_count(), 0) {}

Frame::Frame(std::uint32_t w, std::uint32_t h, Bytes s) : width(w), height(h), samples(std::move(s)) {
  if (samples.size() != pixel_count()) throw CodecError("sample count does not match dimensions");
}

std::size_t Gop::raw_size() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.pixel_count();
  return n;
}

void Gop::validate() const {
  if (frames.empty()) throw CodecError("empty GOP");
  const auto w = frames.front().width;
  const auto h = frames.front().height;
  if (w == 0 || h == 0) throw CodecError("zero frame dimension");
  for (const auto& f : frames) {
    if (f.width != w || f.height != h) throw CodecError("frames in GOP differ in size");
    if (f.samples.size() != f.pixel_count()) throw CodecError("sample count mismatch");
  }
}

std::size_t CompressedGop::payload_size() const {
  std::size_t n = i_payload.size();
  for (const auto& p : p_payloads) n += p.size();
  return n;
}

std::vector<ByteView> CompressedGop::frame_payloads() const {
  std::vector<ByteView> out;
  out.reserve(p_payloads.size() + 1);
  out.emplace_back(i_payload);
  for (const auto& p : p_payloads) out.emplace_back(p);
  return out;
}

double QualityReport::mean_mse() const {
  if (per_frame_mse.empty()) return 0.0;
  double sum = 0.0;
  for (double m : per_frame_mse) sum += m;
  return sum / static_cast<double>(per_frame_mse.size());
}

SyntheticVideo::SyntheticVideo(const SyntheticVideoParams& params) : params_(params) {
  if (params_.width < 8 || params_.height < 8) throw CodecError("synthetic video needs at least 8x8");
  if (params_.gop_size < 2) throw CodecError("gop_size must be at least 2");
  if (!(params_.frame_rate > 0.0)) throw CodecError("frame_rate must be positive");
  Rng rng = Rng::derive(params_.seed, "synthetic-scene");
  const double two_pi = 2.0 * std::numbers::pi;
  phase_x_ = rng.unit() * two_pi;
  phase_y_ = rng.unit() * two_pi;
  freq_x_ = 1 + static_cast<int>(rng.below(2));
  freq_y_ = 1 + static_cast<int>(rng.below(2));
  vel_x_ = params_.motion * rng.uniform(-1.0, 1.0);
  vel_y_ = params_.motion * rng.uniform(-1.0, 1.0);
  const std::uint32_t min_side = std::min(params_.width, params_.height);
  for (int i = 0; i < 3; ++i) {
    Block b{};
    b.size = std::max<std::uint32_t>(2, min_side / (4 + static_cast<std::uint32_t>(rng.below(4))));
    b.x0 = rng.uniform(0.0, params_.width);
    b.y0 = rng.uniform(0.0, params_.height);
    b.vx = params_.motion * rng.uniform(-1.0, 1.0);
    b.vy = params_.motion * rng.uniform(-1.0, 1.0);
    b.offset = rng.below(2) == 0 ? 50 : -50;
    blocks_.push_back(b);
  }
}

Frame SyntheticVideo::frame(std::uint64_t t) const {
  const std::uint32_t w = params_.width;
  const std::uint32_t h = params_.height;
  const double tt = static_cast<double>(t);
  const double two_pi = 2.0 * std::numbers::pi;
  Frame f(w, h);
  Rng noise = Rng::derive(params_.seed, "synthetic-noise", t);
  const std::uint64_t span = 2ULL * params_.noise + 1;
  auto wrap = [](double v, double m) {
    double r = std::fmod(v, m);
    return r < 0 ? r + m : r;
  };
  for (std::uint32_t y = 0; y < h; ++y) {
    const double cy = std::cos(two_pi * freq_y_ * (y - vel_y_ * tt) / h + phase_y_);
    for (std::uint32_t x = 0; x < w; ++x) {
      double v = 128.0 + 60.0 * std::sin(two_pi * freq_x_ * (x - vel_x_ * tt) / w + phase_x_) * cy;
      for (const auto& b : blocks_) {
        const double dx = wrap(x - (b.x0 + b.vx * tt), w);
        const double dy = wrap(y - (b.y0 + b.vy * tt), h);
        if (dx < b.size && dy < b.size) v += b.offset;
      }
      long s = std::lround(v);
      if (params_.noise > 0) s += static_cast<long>(noise.below(span)) - params_.noise;
      f.samples[y * w + x] = static_cast<std::uint8_t>(std::clamp(s, 0L, 255L));
    }
  }
  return f;
}

Gop SyntheticVideo::gop(std::uint64_t index) const {
  Gop g;
  g.index = index;
  const double first_frame = static_cast<double>(index) * params_.gop_size;
  g.timestamp_ms = params_.start_timestamp_ms +
                   static_cast<std::uint64_t>(std::llround(first_frame * 1000.0 / params_.frame_rate));
  g.frames.reserve(params_.gop_size);
  for (std::uint32_t i = 0; i < params_.gop_size; ++i) {
    g.frames.push_back(frame(index * params_.gop_size + i));
  }
  return g;
}

std::vector<Gop> generate_synthetic_video(const SyntheticVideoParams& params, std::uint32_t n_gops) {
  SyntheticVideo video(params);
  std::vector<Gop> out;
  out.reserve(n_gops);
  for (std::uint32_t k = 0; k < n_gops; ++k) out.push_back(video.gop(k));
  return out;
}

std::vector<Gop> generate_synthetic_video(std::uint32_t width, std::uint32_t height,
                                          std::uint32_t n_gops, std::uint32_t gop_size,
                                          std::uint64_t motion_seed) {
  if (width == 0 || height == 0) throw CodecError("zero frame dimension");
  SyntheticVideoParams p;
  p.width = width;
  p.height = height;
  p.gop_size = gop_size;
  p.seed = motion_seed;
  return generate_synthetic_video(p, n_gops);
}

double mse(const Frame& a, const Frame& b) {
  if (a.width != b.width || a.height != b.height || a.samples.size() != b.samples.size()) {
    throw CodecError("mse: dimension mismatch");
  }
  if (a.samples.empty()) return 0.0;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const int d = static_cast<int>(a.samples[i]) - static_cast<int>(b.samples[i]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return static_cast<double>(sum) / static_cast<double>(a.samples.size());
}

double psnr_db(double mse_value) {
  if (!(mse_value >= 0.0)) throw CodecError("psnr_db: negative mse");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse_value);
}

EncodedGop encode_gop_detailed(const Gop& gop, std::uint32_t quantizer,
                               const crypto::Digest& chain_prev_i,
                               const crypto::Digest& chain_prev_last_p) {
  gop.validate();
  require_quantizer(quantizer);
  const int q = static_cast<int>(quantizer);
  const std::uint32_t w = gop.width();
  const std::uint32_t h = gop.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;

  EncodedGop out;
  CompressedGop& c = out.compressed;
  c.quantizer = quantizer;
  c.chain_prev_i = chain_prev_i;
  c.chain_prev_last_p = chain_prev_last_p;
  c.width = w;
  c.height = h;
  c.frame_count = static_cast<std::uint32_t>(gop.frames.size());

  std::vector<int> coded(n);
  Frame recon(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    int level = round_div(gop.frames[0].samples[i], q);
    if (level * q > 255) --level;
    coded[i] = level;
    recon.samples[i] = static_cast<std::uint8_t>(level * q);
  }
  append(c.i_payload, chain_prev_i.view());
  append(c.i_payload, chain_prev_last_p.view());
  rle_encode(coded, c.i_payload);
  out.reconstruction.push_back(recon);

  for (std::size_t k = 1; k < gop.frames.size(); ++k) {
    const Frame& src = gop.frames[k];
    Frame next(w, h);
    for (std::size_t i = 0; i < n; ++i) {
      const int prev = recon.samples[i];
      int level = round_div(static_cast<int>(src.samples[i]) - prev, q);
      if (prev + level * q > 255) --level;
      if (prev + level * q < 0) ++level;
      coded[i] = level;
      next.samples[i] = static_cast<std::uint8_t>(prev + level * q);
    }
    Bytes payload;
    rle_encode(coded, payload);
    c.p_payloads.push_back(std::move(payload));
    recon = next;
    out.reconstruction.push_back(std::move(next));
  }
  return out;
}

CompressedGop encode_gop(const Gop& gop, std::uint32_t quantizer, const crypto::Digest& chain_prev_i,
                         const crypto::Digest& chain_prev_last_p) {
  return encode_gop_detailed(gop, quantizer, chain_prev_i, chain_prev_last_p).compressed;
}

std::vector<Frame> decode_gop(const CompressedGop& c) {
  require_quantizer(c.quantizer);
  if (c.width == 0 || c.height == 0) throw PayloadError("zero frame dimension");
  if (c.frame_count == 0 || c.p_payloads.size() + 1 != c.frame_count) {
    throw PayloadError("payload count does not match frame_count");
  }
  if (c.i_payload.size() < kChainHeaderSize) throw PayloadError("I payload shorter than chain header");
  const int q = static_cast<int>(c.quantizer);
  const std::size_t n = static_cast<std::size_t>(c.width) * c.height;

  std::vector<Frame> frames;
  frames.reserve(c.frame_count);
  Frame recon(c.width, c.height);
  auto intra = rle_decode(ByteView(c.i_payload).subspan(kChainHeaderSize), n);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = intra[i] * q;
    if (intra[i] < 0 || v > 255) throw PayloadError("intra level out of range");
    recon.samples[i] = static_cast<std::uint8_t>(v);
  }
  frames.push_back(recon);
  for (const auto& p : c.p_payloads) {
    auto residual = rle_decode(p, n);
    for (std::size_t i = 0; i < n; ++i) {
      const int v = recon.samples[i] + residual[i] * q;
      if (v < 0 || v > 255) throw PayloadError("reconstruction out of range");
      recon.samples[i] = static_cast<std::uint8_t>(v);
    }
    frames.push_back(recon);
  }
  return frames;
}

QualityReport quality_of_frames(const std::vector<Frame>& original, const std::vector<Frame>& decoded,
                                double threshold_db) {
  if (original.size() != decoded.size()) throw CodecError("quality_of: frame count mismatch");
  QualityReport r;
  r.per_frame_mse.reserve(original.size());
  for (std::size_t i = 0; i < original.size(); ++i) r.per_frame_mse.push_back(mse(original[i], decoded[i]));
  r.mean_psnr_db = psnr_db(r.mean_mse());
  r.meets_threshold = r.mean_psnr_db >= threshold_db;
  return r;
}

QualityReport quality_of(const Gop& original, const CompressedGop& c, double threshold_db) {
  if (original.frames.size() != c.frame_count) throw CodecError("quality_of: frame count mismatch");
  return quality_of_frames(original.frames, decode_gop(c), threshold_db);
}

std::pair<crypto::Digest, crypto::Digest> read_chain_header(ByteView i_payload) {
  if (i_payload.size() < kChainHeaderSize) throw PayloadError("I payload shorter than chain header");
  return {crypto::Digest::from_bytes(i_payload.subspan(0, crypto::kDigestSize)),
          crypto::Digest::from_bytes(i_payload.subspan(crypto::kDigestSize, crypto::kDigestSize))};
}

void write(wire::Encoder& e, const Frame& f) {
  e.u32(f.width);
  e.u32(f.height);
  e.bytes(f.samples);
}

void read(wire::Decoder& d, Frame& f) {
  f.width = d.u32();
  f.height = d.u32();
  f.samples = d.bytes();
  if (f.samples.size() != f.pixel_count()) throw wire::DecodeError("frame sample count mismatch");
}

void write(wire::Encoder& e, const Gop& g) {
  e.u64(g.index);
  e.u64(g.timestamp_ms);
  e.list(g.frames, [](wire::Encoder& enc, const Frame& f) { write(enc, f); });
}

void read(wire::Decoder& d, Gop& g) {
  g.index = d.u64();
  g.timestamp_ms = d.u64();
  g.frames = d.list<Frame>(
      [](wire::Decoder& dec) {
        Frame f;
        read(dec, f);
        return f;
      },
      12);
}

void write(wire::Encoder& e, const CompressedGop& c) {
  e.u32(c.width);
  e.u32(c.height);
  e.u32(c.frame_count);
  e.u32(c.quantizer);
  e.digest(c.chain_prev_i);
  e.digest(c.chain_prev_last_p);
  e.bytes(c.i_payload);
  e.list(c.p_payloads, [](wire::Encoder& enc, const Bytes& p) { enc.bytes(p); });
}

void read(wire::Decoder& d, CompressedGop& c) {
  c.width = d.u32();
  c.height = d.u32();
  c.frame_count = d.u32();
  c.quantizer = d.u32();
  c.chain_prev_i = d.digest();
  c.chain_prev_last_p = d.digest();
  c.i_payload = d.bytes();
  c.p_payloads = d.list<Bytes>([](wire::Decoder& dec) { return dec.bytes(); }, 4);
}

}  // namespace cstore::codec
