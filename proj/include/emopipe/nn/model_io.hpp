#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "emopipe/nn/cnn.hpp"
#include "emopipe/nn/mlp.hpp"

namespace emopipe::nn {

// Binary model file layout (all multi-byte fields little-endian):
//
//   "EMO1"  u16 version  u8 kind (0 = MLP, 1 = CNN)
//   u8 label count, then per label: u8 byte length + UTF-8 bytes
//   MLP: u32 layer count, per layer: u32 in, u32 out, u8 activation, f32 dropout after it
//   CNN: u32 grid, u32 filters, u32 kernel, u32 pool, f32 dropout, u32 dense in, u32 dense out
//   f32 weights and biases in parameters() order, row-major
//   u32 CRC-32 of every preceding byte
inline constexpr std::array<std::uint8_t, 4> kModelMagic{'E', 'M', 'O', '1'};
inline constexpr std::uint16_t kModelVersion = 1;

enum class ModelKind : std::uint8_t { Mlp = 0, Cnn = 1 };

using AnyModel = std::variant<MlpModel, CnnModel>;

std::vector<std::uint8_t> save_model(const MlpModel& model);
std::vector<std::uint8_t> save_model(const CnnModel& model);
std::vector<std::uint8_t> save_model(const AnyModel& model);

/// Throws BadMagic, UnsupportedVersion, TruncatedFile, ChecksumMismatch, and
/// DimensionMismatch for a structurally inconsistent model.
AnyModel load_model(std::span<const std::uint8_t> bytes);

void write_model_file(const std::filesystem::path& path, const AnyModel& model);
AnyModel read_model_file(const std::filesystem::path& path);

}  // namespace emopipe::nn
