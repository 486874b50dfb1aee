#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlcl/encoder.hpp"
#include "mlcl/memory.hpp"

namespace mlcl {

/// Named f64 tensor, the unit of the checkpoint file.
struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> data;

    std::size_t element_count() const;
};

/// Little-endian binary: magic "MLCL", u32 format version, then per
/// tensor: u32 name length, name bytes, u32 rank, u64 dims, f64 payload.
/// Tensors are read until end of file.
void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Tensor naming for the training state: encoder.* / momentum.* for the
/// two encoders, prototypes, queue.keys / queue.labels / queue.meta.
std::vector<NamedTensor> encoder_to_tensors(const EncoderParams& params,
                                            const std::string& prefix);
EncoderParams encoder_from_tensors(const std::vector<NamedTensor>& tensors,
                                   const std::string& prefix);

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace mlcl
