#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dssh/tensor.hpp"

namespace dssh::data {

// Panel of (possibly ragged) series padded to a common length T. Steps at or
// beyond a series' length are zero in y, u and latents.
struct SeriesBatch {
  ad::Tensor y;        // [B x T x M]
  ad::Tensor u;        // [B x T x N]
  std::vector<std::size_t> lengths;
  std::vector<double> scale;  // 1.0 for unstandardized series
  std::vector<std::string> ids;
  ad::Tensor latents;  // optional [B x T x D] true latent paths (simulated data)

  static SeriesBatch zeros(std::size_t batch, std::size_t steps, std::size_t obs_dim,
                           std::size_t cov_dim);

  std::size_t batch_size() const { return lengths.size(); }
  std::size_t max_len() const { return y.defined() ? y.dim(1) : 0; }
  std::size_t obs_dim() const { return y.dim(2); }
  std::size_t cov_dim() const { return u.dim(2); }
  bool has_latents() const { return latents.defined(); }

  double& y_at(std::size_t b, std::size_t t, std::size_t m);
  double y_at(std::size_t b, std::size_t t, std::size_t m) const;
  double& u_at(std::size_t b, std::size_t t, std::size_t n);
  double u_at(std::size_t b, std::size_t t, std::size_t n) const;

  // [B x M] / [B x N] slices at step t, and the [B] observed-mask.
  ad::Tensor y_step(std::size_t t) const;
  ad::Tensor u_step(std::size_t t) const;
  ad::Tensor mask_step(std::size_t t) const;
  // [B x M] mean of y over each series' observed steps.
  ad::Tensor pooled_y() const;

  SeriesBatch select(std::span<const std::size_t> rows) const;
  // Steps [begin, end) of every series; lengths are clipped accordingly.
  SeriesBatch slice_time(std::size_t begin, std::size_t end) const;
  // Zeroes everything beyond each series' length.
  void apply_mask();
  void validate() const;
};

// Rows of several batches with identical dims, padded to the longest.
SeriesBatch concat_batches(std::span<const SeriesBatch> parts);

}  // namespace dssh::data
