#include "relsal/net/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace relsal::net {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

class Writer {
 public:
  template <typename V>
  void put(V v) {
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out_.append(buf, sizeof(V));
  }
  void put_bytes(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <typename V>
  V get(const char* what) {
    need(sizeof(V), what);
    V v;
    std::memcpy(&v, in_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }
  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool at_end() const noexcept { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw IoError(std::string("truncated checkpoint while reading ") + what);
    }
  }

  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const NetworkParams<float>& p = checkpoint.params;
  const ModelConfig& cfg = p.config;
  Writer w;
  w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(sizeof(float)));
  w.put(static_cast<std::int32_t>(cfg.stages));
  w.put(static_cast<std::uint8_t>(cfg.atrous ? 1 : 0));
  w.put(static_cast<std::uint32_t>(cfg.atrous_rates.size()));
  for (const int r : cfg.atrous_rates) {
    w.put(static_cast<std::int32_t>(r));
  }
  w.put(static_cast<std::int32_t>(cfg.n_observers));
  w.put(static_cast<std::int32_t>(cfg.n_classes));
  for (const int c : cfg.channels) {
    w.put(static_cast<std::int32_t>(c));
  }
  w.put(static_cast<std::int32_t>(cfg.transform_width));
  w.put(checkpoint.gt_scale);

  std::uint32_t count = 0;
  for_each_tensor(p, [&](const std::string&, const std::vector<float>&, const std::vector<int>&) {
    ++count;
  });
  w.put(count);
  for_each_tensor(p, [&](const std::string& name, const std::vector<float>& values,
                         const std::vector<int>& shape) {
    w.put(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put(static_cast<std::uint32_t>(shape.size()));
    for (const int d : shape) {
      w.put(static_cast<std::uint32_t>(d));
    }
    w.put_bytes(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
  });
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_bytes(sizeof(kCheckpointMagic), "magic") !=
      std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw IoError("not a relsal checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  if (r.get<std::uint32_t>("scalar size") != sizeof(float)) {
    throw IoError("checkpoint payload is not float32");
  }
  ModelConfig cfg;
  cfg.stages = r.get<std::int32_t>("stages");
  cfg.atrous = r.get<std::uint8_t>("atrous flag") != 0;
  const auto n_rates = r.get<std::uint32_t>("rate count");
  if (n_rates > 64) {
    throw IoError("implausible atrous rate count " + std::to_string(n_rates));
  }
  cfg.atrous_rates.clear();
  for (std::uint32_t i = 0; i < n_rates; ++i) {
    cfg.atrous_rates.push_back(r.get<std::int32_t>("atrous rate"));
  }
  cfg.n_observers = r.get<std::int32_t>("n_observers");
  cfg.n_classes = r.get<std::int32_t>("n_classes");
  for (int& c : cfg.channels) {
    c = r.get<std::int32_t>("encoder width");
  }
  cfg.transform_width = r.get<std::int32_t>("transform width");

  Checkpoint out;
  out.gt_scale = r.get<double>("gt_scale");
  try {
    out.params = make_params<float>(cfg);
  } catch (const Error& e) {
    throw IoError(std::string("checkpoint holds an invalid configuration: ") + e.what());
  }

  std::uint32_t expected = 0;
  for_each_tensor(out.params, [&](const std::string&, const std::vector<float>&,
                                  const std::vector<int>&) { ++expected; });
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != expected) {
    throw IoError("checkpoint has " + std::to_string(count) + " tensors, configuration implies " +
                  std::to_string(expected));
  }
  for_each_tensor(out.params, [&](const std::string& name, std::vector<float>& values,
                                  const std::vector<int>& shape) {
    const auto len = r.get<std::uint32_t>("name length");
    const std::string stored = r.get_bytes(len, "tensor name");
    if (stored != name) {
      throw IoError("expected tensor " + name + ", found " + stored);
    }
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank != shape.size()) {
      throw IoError("rank mismatch for " + name);
    }
    for (const int d : shape) {
      if (r.get<std::uint32_t>("dimension") != static_cast<std::uint32_t>(d)) {
        throw IoError("shape mismatch for " + name);
      }
    }
    const std::string payload = r.get_bytes(values.size() * sizeof(float), "tensor payload");
    std::memcpy(values.data(), payload.data(), payload.size());
  });
  if (!r.at_end()) {
    throw IoError("trailing bytes after checkpoint payload");
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  const std::string bytes = serialize_checkpoint(checkpoint);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) {
    throw IoError("failed writing " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open checkpoint " + path.string());
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace relsal::net
