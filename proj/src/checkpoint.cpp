#include "htc/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "htc/io.hpp"

namespace htc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

nlohmann::json Provenance::to_json() const {
  return {{"topic", topic},
          {"parent", parent ? nlohmann::json(*parent) : nlohmann::json(nullptr)},
          {"epoch", epoch},
          {"dev_metric", dev_metric},
          {"pos_weight", pos_weight}};
}

Provenance Provenance::from_json(const nlohmann::json& doc) {
  Provenance p;
  p.topic = doc.at("topic").get<std::string>();
  if (!doc.at("parent").is_null()) p.parent = doc.at("parent").get<std::string>();
  p.epoch = doc.at("epoch").get<int>();
  p.dev_metric = doc.at("dev_metric").get<double>();
  p.pos_weight = doc.value("pos_weight", 1.0);
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    tensors.push_back({{"name", ck.params.name(i)}, {"rows", ck.params[i].rows()}, {"cols", ck.params[i].cols()}});
  const std::string header =
      nlohmann::json{{"spec", ck.spec.to_json()}, {"provenance", ck.provenance.to_json()}, {"tensors", tensors}}.dump();

  std::string out(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(header.size()));
  out += header;
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    out.append(reinterpret_cast<const char*>(ck.params[i].data()),
               static_cast<std::size_t>(ck.params[i].size()) * sizeof(double));
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_vocab_hash) {
  const std::string in = read_file(path);
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0)
    throw CheckpointError("'" + path.string() + "' is not a checkpoint archive");
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(in, pos);
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = take<std::uint64_t>(in, pos);
  if (pos + header_len > in.size()) throw CheckpointError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;

  Checkpoint ck;
  try {
    ck.spec = ModelSpec::from_json(header.at("spec"));
    ck.provenance = Provenance::from_json(header.at("provenance"));
    for (const auto& t : header.at("tensors")) {
      const auto rows = t.at("rows").get<Eigen::Index>(), cols = t.at("cols").get<Eigen::Index>();
      const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (rows < 0 || cols < 0 || pos + bytes > in.size()) throw CheckpointError("checkpoint tensor data truncated");
      Mat m(rows, cols);
      std::memcpy(m.data(), in.data() + pos, bytes);
      pos += bytes;
      ck.params.add(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (pos != in.size()) throw CheckpointError("trailing bytes after checkpoint tensors");
  if (expected_vocab_hash && ck.spec.vocab_hash != *expected_vocab_hash)
    throw CheckpointError("checkpoint '" + path.string() + "' was trained with a different vocabulary");
  return ck;
}

std::string checkpoint_file_name(const std::string& topic) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : topic) {
    if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out + ".ckpt";
}

}  // namespace htc
