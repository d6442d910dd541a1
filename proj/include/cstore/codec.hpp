#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cstore/bytes.hpp"
#include "cstore/crypto.hpp"
#include "cstore/encoding.hpp"

// Toy predictive luma coder. A GOP is one intra frame followed by P frames, each
// P frame a quantized residual against the reconstruction of the frame before it.
// Coded frames are run-length streams; the I payload starts with the 64-byte
// chain header linking it to the previous GOP of the same video.
namespace cstore::codec {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Truncated, malformed or out-of-range payload data.
class PayloadError : public CodecError {
 public:
  using CodecError::CodecError;
};

inline constexpr std::string_view kAlgorithmId = "cs-rle/1";
inline constexpr std::size_t kChainHeaderSize = 2 * crypto::kDigestSize;

struct Frame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  Bytes samples;  // row-major luma

  Frame() = default;
  Frame(std::uint32_t w, std::uint32_t h);
  Frame(std::uint32_t w, std::uint32_t h, Bytes s);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t at(std::uint32_t x, std::uint32_t y) const { return samples[y * width + x]; }

  bool operator==(const Frame&) const = default;
};

struct Gop {
  std::vector<Frame> frames;
  std::uint64_t index = 0;
  std::uint64_t timestamp_ms = 0;

  std::uint32_t width() const { return frames.empty() ? 0 : frames.front().width; }
  std::uint32_t height() const { return frames.empty() ? 0 : frames.front().height; }
  std::size_t raw_size() const;

  // Throws CodecError unless non-empty with uniform, consistent frame dimensions.
  void validate() const;

  bool operator==(const Gop&) const = default;
};

struct CompressedGop {
  Bytes i_payload;                // chain header || coded intra frame
  std::vector<Bytes> p_payloads;  // coded residual frames
  std::uint32_t quantizer = 1;
  crypto::Digest chain_prev_i;
  crypto::Digest chain_prev_last_p;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t frame_count = 0;

  std::size_t payload_size() const;
  const Bytes& last_payload() const { return p_payloads.empty() ? i_payload : p_payloads.back(); }

  // Payloads in frame order: I first, then each P.
  std::vector<ByteView> frame_payloads() const;

  bool operator==(const CompressedGop&) const = default;
};

struct QualityReport {
  std::vector<double> per_frame_mse;
  double mean_psnr_db = 0.0;
  bool meets_threshold = false;

  double mean_mse() const;
};

struct SyntheticVideoParams {
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  std::uint32_t gop_size = 25;
  std::uint64_t seed = 0;
  double motion = 1.0;     // peak translation in pixels per frame
  std::uint32_t noise = 2; // per-sample noise amplitude, uniform in [-noise, noise]
  double frame_rate = 25.0;
  std::uint64_t start_timestamp_ms = 0;
};

// Random-access synthetic source: a drifting sinusoidal pattern with a few moving
// blocks plus bounded noise. Any frame can be produced without its predecessors.
class SyntheticVideo {
 public:
  explicit SyntheticVideo(const SyntheticVideoParams& params);

  Frame frame(std::uint64_t t) const;
  Gop gop(std::uint64_t index) const;
  const SyntheticVideoParams& params() const { return params_; }

 private:
  struct Block {
    double x0, y0, vx, vy;
    std::uint32_t size;
    int offset;
  };

  SyntheticVideoParams params_;
  double phase_x_ = 0, phase_y_ = 0, vel_x_ = 0, vel_y_ = 0;
  int freq_x_ = 1, freq_y_ = 1;
  std::vector<Block> blocks_;
};

std::vector<Gop> generate_synthetic_video(std::uint32_t width, std::uint32_t height,
                                          std::uint32_t n_gops, std::uint32_t gop_size,
                                          std::uint64_t motion_seed);
std::vector<Gop> generate_synthetic_video(const SyntheticVideoParams& params,
                                          std::uint32_t n_gops);

double mse(const Frame& a, const Frame& b);

// +infinity for mse 0; throws CodecError for negative input.
double psnr_db(double mse_value);

struct EncodedGop {
  CompressedGop compressed;
  std::vector<Frame> reconstruction;
};

EncodedGop encode_gop_detailed(const Gop& gop, std::uint32_t quantizer,
                               const crypto::Digest& chain_prev_i,
                               const crypto::Digest& chain_prev_last_p);

CompressedGop encode_gop(const Gop& gop, std::uint32_t quantizer,
                         const crypto::Digest& chain_prev_i,
                         const crypto::Digest& chain_prev_last_p);

// Throws PayloadError on any malformed payload.
std::vector<Frame> decode_gop(const CompressedGop& c);

QualityReport quality_of(const Gop& original, const CompressedGop& c, double threshold_db);
QualityReport quality_of_frames(const std::vector<Frame>& original,
                                const std::vector<Frame>& decoded, double threshold_db);

// The two chain digests embedded at the start of an I payload.
std::pair<crypto::Digest, crypto::Digest> read_chain_header(ByteView i_payload);

void write(wire::Encoder& e, const Frame& f);
void read(wire::Decoder& d, Frame& f);
void write(wire::Encoder& e, const Gop& g);
void read(wire::Decoder& d, Gop& g);
void write(wire::Encoder& e, const CompressedGop& c);
void read(wire::Decoder& d, CompressedGop& c);

}  // namespace cstore::codec
