#include "sap/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sap/error.hpp"

namespace sap::ad {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'P', 'C', 'K', 'P', 'T', '\n'};

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) {
    if (pos + n > bytes.size()) {
      throw ConfigError("checkpoint truncated at byte " + std::to_string(pos));
    }
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    char buf[sizeof(T)];
    std::memcpy(buf, bytes.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::string encode_checkpoint(const CheckpointHeader& header, const Mlp& net) {
  std::vector<std::uint64_t> widths(net.widths().begin(), net.widths().end());
  if (!header.widths.empty() && header.widths != widths) {
    throw DimensionError("checkpoint header widths disagree with the network");
  }
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, header.version);
  put_string(out, header.module);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(widths.size()));
  for (auto w : widths) put<std::uint64_t>(out, w);
  put_string(out, header.activation);
  put<std::uint64_t>(out, header.seed);
  put<std::uint64_t>(out, header.step);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.meta.size()));
  for (const auto& [k, v] : header.meta) {
    put_string(out, k);
    put_string(out, v);
  }
  const auto flat = net.flat_parameters();
  put<std::uint64_t>(out, flat.size());
  for (double v : flat) put<double>(out, v);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("not a checkpoint file (bad magic)");
  }
  Reader r{bytes, sizeof(kMagic)};
  Checkpoint ck;
  auto& h = ck.header;
  h.version = r.get<std::uint32_t>();
  if (h.version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(h.version));
  }
  h.module = r.get_string();
  const auto nw = r.get<std::uint32_t>();
  std::vector<std::size_t> widths;
  for (std::uint32_t i = 0; i < nw; ++i) {
    h.widths.push_back(r.get<std::uint64_t>());
    widths.push_back(static_cast<std::size_t>(h.widths.back()));
  }
  h.activation = r.get_string();
  if (h.activation != "relu") throw ConfigError("unknown activation tag '" + h.activation + "'");
  h.seed = r.get<std::uint64_t>();
  h.step = r.get<std::uint64_t>();
  const auto nm = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nm; ++i) {
    auto k = r.get_string();
    h.meta[k] = r.get_string();
  }
  ck.net = Mlp::zeros(widths);
  const auto np = r.get<std::uint64_t>();
  if (np != ck.net.parameter_count()) {
    throw DimensionError("checkpoint holds " + std::to_string(np) + " parameters, widths imply " +
                         std::to_string(ck.net.parameter_count()));
  }
  std::vector<double> flat(np);
  for (auto& v : flat) v = r.get<double>();
  if (r.pos != bytes.size()) throw ConfigError("trailing bytes after checkpoint parameters");
  ck.net.set_flat_parameters(flat);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header,
                     const Mlp& net) {
  const auto bytes = encode_checkpoint(header, net);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("checkpoint not found: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace sap::ad
