// Writes the three-item attend fixture. Expected outputs come from the
// item-by-item reference implementation, not from the histogram code.
#include <filesystem>
#include <iostream>

#include "lisa/oracles.hpp"
#include "lisa/tensor_io.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden <output-dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);

  // B=2, W=4, D=4.
  const lisa::Codebooks codebooks(2, 4, 4,
                                  {
                                      1.0, 0.0, 0.0, 0.0,   //
                                      0.0, 1.0, 0.0, 0.0,   //
                                      0.5, 0.5, 0.0, 0.0,   //
                                      -1.0, 0.0, 0.5, 0.0,  //
                                      0.0, 0.0, 1.0, 0.0,   //
                                      0.0, 0.0, 0.0, 1.0,   //
                                      0.25, 0.0, 0.0, -0.5, //
                                      0.0, -0.75, 0.5, 0.5, //
                                  });
  const lisa::CodewordIndices codes(3, 2, {0, 1, 2, 3, 0, 2});
  const auto proj = lisa::ProjectionSet::identity(4);

  lisa::write_tensor(dir / "codebooks.lisa", lisa::to_tensor(codebooks));
  lisa::write_tensor(dir / "codes.lisa", lisa::to_tensor(codes));
  lisa::write_tensor(dir / "golden_uni.lisa",
                     lisa::to_tensor(lisa::oracle::direct_relaxed_attention(
                         codes, codebooks, proj, lisa::AttentionMode::unidirectional)));
  lisa::write_tensor(dir / "golden_bi.lisa",
                     lisa::to_tensor(lisa::oracle::direct_relaxed_attention(
                         codes, codebooks, proj, lisa::AttentionMode::bidirectional)));
  return 0;
}
