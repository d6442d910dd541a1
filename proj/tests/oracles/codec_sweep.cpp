// Quantizer sweep over the golden synthetic GOP. Prints one row per quantizer;
// the committed golden values in tests/golden were taken from this output.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "cstore/codec.hpp"
#include "cstore/consensus.hpp"

int main(int argc, char** argv) {
  using namespace cstore;
  codec::SyntheticVideoParams p;
  p.seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;
  const auto gop = codec::SyntheticVideo(p).gop(0);
  std::printf("raw_bytes %zu digest %s\n", gop.raw_size(), consensus::raw_gop_digest(gop).hex().c_str());
  std::printf("q,payload_bytes,mean_psnr_db,i_payload_digest\n");
  for (std::uint32_t q : {1u, 2u, 3u, 4u, 6u, 8u, 12u, 16u, 24u, 32u, 48u, 64u, 128u, 255u}) {
    auto c = codec::encode_gop(gop, q, crypto::Digest::zero(), crypto::Digest::zero());
    auto r = codec::quality_of(gop, c, 0.0);
    std::printf("%u,%zu,%.17g,%s\n", q, c.payload_size(), r.mean_psnr_db, crypto::hash(c.i_payload).hex().c_str());
  }
  for (double t : {0.0, 30.0, 35.0, 40.0}) {
    auto choice = consensus::search_quantizer(gop, {64, 32, 16, 8, 4, 2, 1}, t);
    std::printf("threshold %.1f -> q %u steps %zu psnr %.17g\n", t, choice.quantizer, choice.steps, choice.mean_psnr_db);
  }
}
