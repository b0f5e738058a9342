#include "dssh/series.hpp"

#include <algorithm>
#include <stdexcept>

namespace dssh::data {

namespace {

ad::Tensor slice_rows3(const ad::Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t t = x.dim(1), d = x.dim(2);
  std::vector<double> out(rows.size() * t * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.data().data() + rows[i] * t * d, t * d, out.data() + i * t * d);
  }
  return ad::Tensor::from({rows.size(), t, d}, std::move(out));
}

ad::Tensor slice_time3(const ad::Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  const std::size_t w = end - begin;
  std::vector<double> out(b * w * d);
  for (std::size_t i = 0; i < b; ++i) {
    std::copy_n(x.data().data() + (i * t + begin) * d, w * d, out.data() + i * w * d);
  }
  return ad::Tensor::from({b, w, d}, std::move(out));
}

ad::Tensor step3(const ad::Tensor& x, std::size_t step) {
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  std::vector<double> out(b * d);
  for (std::size_t i = 0; i < b; ++i) {
    std::copy_n(x.data().data() + (i * t + step) * d, d, out.data() + i * d);
  }
  return ad::Tensor::from({b, d}, std::move(out));
}

void zero_tail(ad::Tensor& x, const std::vector<std::size_t>& lengths) {
  const std::size_t t = x.dim(1), d = x.dim(2);
  auto v = x.mutable_data();
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    std::fill(v.begin() + (i * t + std::min(lengths[i], t)) * d, v.begin() + (i + 1) * t * d, 0.0);
  }
}

}  // namespace

SeriesBatch SeriesBatch::zeros(std::size_t batch, std::size_t steps, std::size_t obs_dim,
                               std::size_t cov_dim) {
  SeriesBatch s;
  s.y = ad::Tensor::zeros({batch, steps, obs_dim});
  s.u = ad::Tensor::zeros({batch, steps, cov_dim});
  s.lengths.assign(batch, steps);
  s.scale.assign(batch, 1.0);
  s.ids.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) s.ids[i] = std::to_string(i);
  return s;
}

double& SeriesBatch::y_at(std::size_t b, std::size_t t, std::size_t m) {
  return y.mutable_data()[(b * y.dim(1) + t) * y.dim(2) + m];
}
double SeriesBatch::y_at(std::size_t b, std::size_t t, std::size_t m) const {
  return y.at(b, t, m);
}
double& SeriesBatch::u_at(std::size_t b, std::size_t t, std::size_t n) {
  return u.mutable_data()[(b * u.dim(1) + t) * u.dim(2) + n];
}
double SeriesBatch::u_at(std::size_t b, std::size_t t, std::size_t n) const {
  return u.at(b, t, n);
}

ad::Tensor SeriesBatch::y_step(std::size_t t) const { return step3(y, t); }
ad::Tensor SeriesBatch::u_step(std::size_t t) const { return step3(u, t); }

ad::Tensor SeriesBatch::mask_step(std::size_t t) const {
  const std::size_t b = batch_size();
  std::vector<double> m(b);
  for (std::size_t i = 0; i < b; ++i) m[i] = t < lengths[i] ? 1.0 : 0.0;
  return ad::Tensor::from({b}, std::move(m));
}

ad::Tensor SeriesBatch::pooled_y() const {
  const std::size_t b = batch_size(), m = obs_dim();
  std::vector<double> out(b * m, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t len = std::min(lengths[i], max_len());
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t k = 0; k < m; ++k) out[i * m + k] += y_at(i, t, k);
    }
    if (len > 0) {
      for (std::size_t k = 0; k < m; ++k) out[i * m + k] /= static_cast<double>(len);
    }
  }
  return ad::Tensor::from({b, m}, std::move(out));
}

SeriesBatch SeriesBatch::select(std::span<const std::size_t> rows) const {
  for (auto r : rows) {
    if (r >= batch_size()) throw std::out_of_range("series row " + std::to_string(r));
  }
  SeriesBatch s;
  s.y = slice_rows3(y, rows);
  s.u = slice_rows3(u, rows);
  if (has_latents()) s.latents = slice_rows3(latents, rows);
  for (auto r : rows) {
    s.lengths.push_back(lengths[r]);
    s.scale.push_back(scale[r]);
    s.ids.push_back(ids[r]);
  }
  return s;
}

SeriesBatch SeriesBatch::slice_time(std::size_t begin, std::size_t end) const {
  if (begin > end || end > max_len()) {
    throw std::out_of_range("time slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") outside series of length " + std::to_string(max_len()));
  }
  SeriesBatch s;
  s.y = slice_time3(y, begin, end);
  s.u = slice_time3(u, begin, end);
  if (has_latents()) s.latents = slice_time3(latents, begin, end);
  s.scale = scale;
  s.ids = ids;
  for (auto len : lengths) {
    s.lengths.push_back(len <= begin ? 0 : std::min(len, end) - begin);
  }
  return s;
}

void SeriesBatch::apply_mask() {
  zero_tail(y, lengths);
  zero_tail(u, lengths);
  if (has_latents()) zero_tail(latents, lengths);
}

void SeriesBatch::validate() const {
  const std::size_t b = lengths.size();
  if (y.rank() != 3 || u.rank() != 3 || y.dim(0) != b || u.dim(0) != b || u.dim(1) != y.dim(1)) {
    throw ad::ShapeError("inconsistent series batch: y " + ad::shape_to_string(y.shape()) +
                         ", u " + ad::shape_to_string(u.shape()) + ", " + std::to_string(b) +
                         " lengths");
  }
  if (scale.size() != b || ids.size() != b) {
    throw ad::ShapeError("series batch scale/id count mismatch");
  }
  for (auto len : lengths) {
    if (len > y.dim(1)) throw ad::ShapeError("series length exceeds padded length");
  }
}

SeriesBatch concat_batches(std::span<const SeriesBatch> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_batches: no parts");
  std::size_t rows = 0, steps = 0;
  for (const auto& p : parts) {
    rows += p.batch_size();
    steps = std::max(steps, p.max_len());
  }
  const std::size_t m = parts[0].obs_dim(), n = parts[0].cov_dim();
  const bool lat = parts[0].has_latents();
  SeriesBatch out = SeriesBatch::zeros(rows, steps, m, n);
  const std::size_t d = lat ? parts[0].latents.dim(2) : 0;
  if (lat) out.latents = ad::Tensor::zeros({rows, steps, d});
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.obs_dim() != m || p.cov_dim() != n || p.has_latents() != lat) {
      throw ad::ShapeError("concat_batches: dimension mismatch");
    }
    for (std::size_t i = 0; i < p.batch_size(); ++i, ++r) {
      for (std::size_t t = 0; t < p.max_len(); ++t) {
        for (std::size_t k = 0; k < m; ++k) out.y_at(r, t, k) = p.y_at(i, t, k);
        for (std::size_t k = 0; k < n; ++k) out.u_at(r, t, k) = p.u_at(i, t, k);
        if (lat) {
          for (std::size_t k = 0; k < d; ++k) {
            out.latents.mutable_data()[(r * steps + t) * d + k] = p.latents.at(i, t, k);
          }
        }
      }
      out.lengths[r] = p.lengths[i];
      out.scale[r] = p.scale[i];
      out.ids[r] = p.ids[i];
    }
  }
  return out;
}

}  // namespace dssh::data
