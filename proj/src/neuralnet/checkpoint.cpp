#include "dssh/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace dssh::nn {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'S', 'H'};
const std::string kAdamM = ".adam.m";
const std::string kAdamV = ".adam.v";
const std::string kAdamT = ".adam.t";

template <typename U>
void put_le(std::ostream& os, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const std::filesystem::path& path) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw ArchiveError("truncated archive " + path.string());
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void write_archive(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArchiveError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kArchiveVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(os, d);
    for (double v : t.data()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw ArchiveError("write failed for " + path.string());
}

std::vector<NamedTensor> read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw ArchiveError("bad magic in " + path.string());
  }
  const auto version = get_le<std::uint32_t>(is, path);
  if (version != kArchiveVersion) {
    throw ArchiveError("unsupported archive version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(is, path);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = get_le<std::uint32_t>(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw ArchiveError("truncated name in " + path.string());
    const auto rank = get_le<std::uint32_t>(is, path);
    ad::Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(is, path));
    std::vector<double> data(ad::shape_numel(shape));
    for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(is, path));
    out.emplace_back(std::move(name), ad::Tensor::from(std::move(shape), std::move(data)));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const AdamState* optimizer) {
  std::vector<NamedTensor> entries;
  for (const auto& [name, t] : params) entries.emplace_back(name, t);
  if (optimizer) {
    for (const auto& [name, t] : params) {
      auto find_or_zero = [&](const std::map<std::string, std::vector<double>>& src) {
        auto it = src.find(name);
        std::vector<double> v = it == src.end() ? std::vector<double>(t.size(), 0.0) : it->second;
        return ad::Tensor::from(t.shape(), std::move(v));
      };
      entries.emplace_back(name + kAdamM, find_or_zero(optimizer->m));
      entries.emplace_back(name + kAdamV, find_or_zero(optimizer->v));
    }
    entries.emplace_back(kAdamT, ad::Tensor::scalar(static_cast<double>(optimizer->t)));
  }
  write_archive(path, entries);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck;
  AdamState adam;
  bool has_adam = false;
  for (auto& [name, t] : read_archive(path)) {
    if (name == kAdamT) {
      adam.t = static_cast<std::int64_t>(t.item());
      has_adam = true;
    } else if (ends_with(name, kAdamM)) {
      auto d = t.data();
      adam.m[name.substr(0, name.size() - kAdamM.size())] = {d.begin(), d.end()};
    } else if (ends_with(name, kAdamV)) {
      auto d = t.data();
      adam.v[name.substr(0, name.size() - kAdamV.size())] = {d.begin(), d.end()};
    } else {
      ck.params.add(name, t);
    }
  }
  if (has_adam) ck.optimizer = std::move(adam);
  return ck;
}

}  // namespace dssh::nn
