#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <unordered_map>

#include "dssh/data.hpp"

namespace dssh::data {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_int(std::string_view s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

constexpr std::int64_t kDay = 86400;

}  // namespace

std::int64_t parse_iso8601(const std::string& s) {
  // YYYY-MM-DD[(T| )HH:MM[:SS]][Z]
  std::string_view v(s);
  if (!v.empty() && v.back() == 'Z') v.remove_suffix(1);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  const bool date_ok = v.size() >= 10 && v[4] == '-' && v[7] == '-' && parse_int(v.substr(0, 4), y) &&
                       parse_int(v.substr(5, 2), mo) && parse_int(v.substr(8, 2), d);
  if (!date_ok) throw DataError("bad timestamp '" + s + "'");
  if (v.size() > 10) {
    const bool time_ok = (v[10] == 'T' || v[10] == ' ') && v.size() >= 16 && v[13] == ':' &&
                         parse_int(v.substr(11, 2), h) && parse_int(v.substr(14, 2), mi) &&
                         (v.size() == 16 || (v.size() == 19 && v[16] == ':' &&
                                             parse_int(v.substr(17, 2), sec)));
    if (!time_ok) throw DataError("bad timestamp '" + s + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59) throw DataError("bad timestamp '" + s + "'");
  const auto days = std::chrono::sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kDay + h * 3600 + mi * 60 + sec;
}

std::string format_iso8601(std::int64_t seconds) {
  std::int64_t days = seconds / kDay;
  std::int64_t rem = seconds % kDay;
  if (rem < 0) {
    rem += kDay;
    --days;
  }
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(rem / 3600), int(rem % 3600 / 60),
                int(rem % 60));
  return buf;
}

CsvPanel load_csv_panel(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = split_commas(line);
  if (header.size() < 3 || header[0] != "timestamp" || header[1] != "series_id" ||
      header[2] != "value") {
    throw DataError(path + ":1: header must start with timestamp,series_id,value");
  }
  const std::size_t n_extra = opts.extra_covariates ? header.size() - 3 : 0;

  std::vector<std::string> order;
  std::unordered_map<std::string, std::map<std::int64_t, std::vector<double>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_commas(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(f.size()));
    }
    std::int64_t ts = 0;
    try {
      ts = parse_iso8601(f[0]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    std::vector<double> vals(1 + n_extra);
    for (std::size_t k = 0; k < vals.size(); ++k) {
      if (!parse_double(f[2 + k], vals[k])) {
        throw DataError(where + ": cannot parse number '" + f[2 + k] + "'");
      }
    }
    auto [it, fresh] = rows.try_emplace(f[1]);
    if (fresh) order.push_back(f[1]);
    if (!it->second.emplace(ts, std::move(vals)).second) {
      throw DataError(where + ": duplicate timestamp " + f[0] + " for series '" + f[1] + "'");
    }
  }
  if (order.empty()) throw DataError(path + ": no data rows");

  // Sampling interval: smallest positive spacing seen in any series.
  std::int64_t step = 0;
  for (const auto& [id, m] : rows) {
    std::int64_t prev = 0;
    bool first = true;
    for (const auto& [ts, v] : m) {
      if (!first && (step == 0 || ts - prev < step)) step = ts - prev;
      prev = ts;
      first = false;
    }
  }
  if (step == 0) step = 3600;

  CsvPanel out;
  out.step_seconds = step;
  for (std::size_t k = 0; k < n_extra; ++k) out.covariate_names.push_back(header[3 + k]);
  if (opts.hour_of_day) {
    for (int h = 0; h < 24; ++h) out.covariate_names.push_back("hour_" + std::to_string(h));
  }
  if (opts.day_of_week) {
    for (int d = 0; d < 7; ++d) out.covariate_names.push_back("dow_" + std::to_string(d));
  }
  if (opts.gap_flag) out.covariate_names.push_back("gap");
  const std::size_t n_cov = std::max<std::size_t>(out.covariate_names.size(), 1);

  std::vector<std::size_t> lens;
  for (const auto& id : order) {
    const auto& m = rows.at(id);
    const std::int64_t span = m.rbegin()->first - m.begin()->first;
    if (span % step != 0) {
      throw DataError(path + ": series '" + id + "' has timestamps off the " +
                      std::to_string(step) + "s grid");
    }
    lens.push_back(static_cast<std::size_t>(span / step) + 1);
  }
  const std::size_t t_max = *std::max_element(lens.begin(), lens.end());
  out.batch = SeriesBatch::zeros(order.size(), t_max, 1, n_cov);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& m = rows.at(order[i]);
    const std::int64_t t0 = m.begin()->first;
    out.start.push_back(t0);
    out.batch.ids[i] = order[i];
    out.batch.lengths[i] = lens[i];
    const std::vector<double>* last = nullptr;
    for (std::size_t t = 0; t < lens[i]; ++t) {
      const std::int64_t ts = t0 + static_cast<std::int64_t>(t) * step;
      auto it = m.find(ts);
      const bool gap = it == m.end();
      if (!gap) last = &it->second;
      if (gap) ++out.filled;
      const auto& vals = *last;  // first step always exists
      out.batch.y_at(i, t, 0) = vals[0];
      std::size_t c = 0;
      for (std::size_t k = 0; k < n_extra; ++k) out.batch.u_at(i, t, c++) = vals[1 + k];
      std::int64_t days = ts / kDay, rem = ts % kDay;
      if (rem < 0) {
        rem += kDay;
        --days;
      }
      if (opts.hour_of_day) out.batch.u_at(i, t, c + static_cast<std::size_t>(rem / 3600)) = 1.0;
      if (opts.hour_of_day) c += 24;
      if (opts.day_of_week) {
        // 1970-01-01 was a Thursday; index 0 is Monday.
        const auto dow = static_cast<std::size_t>(((days % 7) + 7 + 3) % 7);
        out.batch.u_at(i, t, c + dow) = 1.0;
        c += 7;
      }
      if (opts.gap_flag) out.batch.u_at(i, t, c++) = gap ? 1.0 : 0.0;
    }
  }
  return out;
}

void write_csv_panel(const std::string& path, const SeriesBatch& batch, std::int64_t start,
                     std::int64_t step_seconds) {
  if (batch.obs_dim() != 1) throw DataError("write_csv_panel: only univariate series supported");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "timestamp,series_id,value";
  for (std::size_t k = 0; k < batch.cov_dim(); ++k) out << ",u" << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    for (std::size_t t = 0; t < batch.lengths[i]; ++t) {
      out << format_iso8601(start + static_cast<std::int64_t>(t) * step_seconds) << ','
          << batch.ids[i] << ',' << format_double(batch.y_at(i, t, 0));
      for (std::size_t k = 0; k < batch.cov_dim(); ++k) out << ',' << format_double(batch.u_at(i, t, k));
      out << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

void write_latents_csv(const std::string& path, const SeriesBatch& batch) {
  if (!batch.has_latents()) throw DataError("write_latents_csv: batch has no latents");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  const std::size_t d = batch.latents.dim(2);
  out << "t,series_id";
  for (std::size_t k = 0; k < d; ++k) out << ",beta" << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    for (std::size_t t = 0; t < batch.lengths[i]; ++t) {
      out << t << ',' << batch.ids[i];
      for (std::size_t k = 0; k < d; ++k) out << ',' << format_double(batch.latents.at(i, t, k));
      out << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

void read_latents_csv(const std::string& path, SeriesBatch& batch) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = split_commas(line);
  if (header.size() < 3 || header[0] != "t" || header[1] != "series_id") {
    throw DataError(path + ":1: header must start with t,series_id");
  }
  const std::size_t d = header.size() - 2;
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < batch.batch_size(); ++i) row_of[batch.ids[i]] = i;
  batch.latents = ad::Tensor::zeros({batch.batch_size(), batch.max_len(), d});
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_commas(line);
    const std::string where = path + ":" + std::to_string(lineno);
    int t = 0;
    if (f.size() != header.size() || !parse_int(f[0], t) || t < 0) {
      throw DataError(where + ": malformed row");
    }
    auto it = row_of.find(f[1]);
    if (it == row_of.end()) continue;
    if (static_cast<std::size_t>(t) >= batch.max_len()) throw DataError(where + ": t out of range");
    for (std::size_t k = 0; k < d; ++k) {
      double v = 0.0;
      if (!parse_double(f[2 + k], v)) throw DataError(where + ": cannot parse number");
      batch.latents.mutable_data()[(it->second * batch.max_len() + t) * d + k] = v;
    }
  }
}

WindowSet make_windows(const SeriesBatch& batch, std::size_t context_len, std::size_t horizon,
                       std::size_t stride) {
  if (context_len < 1 || horizon < 1 || stride < 1) {
    throw DataError("make_windows: context, horizon and stride must be >= 1");
  }
  WindowSet ws;
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const std::size_t len = batch.lengths[i];
    if (len < context_len + horizon) {
      ++ws.skipped;
      continue;
    }
    for (std::size_t o = 0; o + context_len + horizon <= len; o += stride) {
      ws.windows.push_back({i, o, context_len, horizon});
    }
  }
  return ws;
}

SeriesBatch extract_windows(const SeriesBatch& batch, const std::vector<Window>& windows) {
  if (windows.empty()) throw DataError("extract_windows: no windows");
  const std::size_t w = windows[0].context_len + windows[0].horizon;
  const std::size_t m = batch.obs_dim(), n = batch.cov_dim();
  SeriesBatch out = SeriesBatch::zeros(windows.size(), w, m, n);
  const bool lat = batch.has_latents();
  const std::size_t d = lat ? batch.latents.dim(2) : 0;
  if (lat) out.latents = ad::Tensor::zeros({windows.size(), w, d});
  for (std::size_t r = 0; r < windows.size(); ++r) {
    const Window& win = windows[r];
    if (win.context_len + win.horizon != w) throw DataError("extract_windows: mixed window sizes");
    if (win.series >= batch.batch_size() || win.origin + w > batch.lengths[win.series]) {
      throw DataError("extract_windows: window outside its series");
    }
    for (std::size_t t = 0; t < w; ++t) {
      for (std::size_t k = 0; k < m; ++k) out.y_at(r, t, k) = batch.y_at(win.series, win.origin + t, k);
      for (std::size_t k = 0; k < n; ++k) out.u_at(r, t, k) = batch.u_at(win.series, win.origin + t, k);
      for (std::size_t k = 0; k < d; ++k) {
        out.latents.mutable_data()[(r * w + t) * d + k] = batch.latents.at(win.series, win.origin + t, k);
      }
    }
    out.scale[r] = batch.scale[win.series];
    out.ids[r] = batch.ids[win.series] + "@" + std::to_string(win.origin);
  }
  return out;
}

}  // namespace dssh::data
