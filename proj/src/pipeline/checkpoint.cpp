#include <bit>
#include <cstring>
#include <fstream>

#include "mattevit/checkpoint.hpp"
#include "mattevit/errors.hpp"

namespace mattevit {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'C', 'K'};
constexpr std::uint8_t kFloat64 = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  template <typename U>
  void uint(U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(U));
  }

  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(path_.string() + ": truncated checkpoint");
  }

  template <typename U>
  U uint() {
    unsigned char buf[sizeof(U)];
    bytes(buf, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }

  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  // Lengths come from the file, so bound them by what is left before allocating.
  std::size_t length(std::uint64_t n, std::size_t unit) {
    const auto pos = in_.tellg();
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(pos);
    if (n > static_cast<std::uint64_t>(end - pos) / unit) throw FormatError(path_.string() + ": truncated checkpoint");
    return static_cast<std::size_t>(n);
  }

 private:
  std::ifstream& in_;
  const std::filesystem::path& path_;
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void Checkpoint::add(std::string name, const Tensor& tensor) {
  if (find(name) != nullptr) throw ContractError("duplicate checkpoint tensor '" + name + "'");
  tensors.emplace_back(std::move(name), tensor.detach());
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    Writer w(out);
    w.bytes(kMagic, 4);
    w.uint<std::uint32_t>(checkpoint.version);
    const std::string meta = checkpoint.meta.dump();
    w.uint<std::uint64_t>(meta.size());
    w.bytes(meta.data(), meta.size());
    w.uint<std::uint64_t>(checkpoint.tensors.size());
    for (const auto& [name, t] : checkpoint.tensors) {
      w.uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
      w.bytes(name.data(), name.size());
      w.uint<std::uint8_t>(kFloat64);
      w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) w.uint<std::uint64_t>(d);
      for (double v : t.data()) w.f64(v);
    }
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r(in, path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + ": not a checkpoint file");
  Checkpoint ckpt;
  ckpt.version = r.uint<std::uint32_t>();
  if (ckpt.version != Checkpoint::kVersion) {
    throw FormatError(path.string() + ": checkpoint version " + std::to_string(ckpt.version) +
                      " is not supported (expected " + std::to_string(Checkpoint::kVersion) + ")");
  }
  std::string meta(r.length(r.uint<std::uint64_t>(), 1), '\0');
  r.bytes(meta.data(), meta.size());
  try {
    ckpt.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint metadata: " + e.what());
  }
  const std::uint64_t count = r.uint<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(r.length(r.uint<std::uint32_t>(), 1), '\0');
    r.bytes(name.data(), name.size());
    if (r.uint<std::uint8_t>() != kFloat64) throw FormatError(path.string() + ": unsupported dtype for '" + name + "'");
    const std::uint32_t rank = r.uint<std::uint32_t>();
    Shape shape(r.length(rank, 8));
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.uint<std::uint64_t>());
      numel *= d;
    }
    std::vector<double> values(r.length(numel, 8));
    for (double& v : values) v = r.f64();
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes after checkpoint");
  return ckpt;
}

void store_parameters(Checkpoint& ckpt, const ParameterSet& params, const std::string& prefix) {
  for (const auto& [name, t] : params) ckpt.add(prefix + name, t);
}

void restore_parameters(const Checkpoint& ckpt, ParameterSet& params, const std::string& prefix) {
  for (auto& [name, t] : params) {
    const Tensor* src = ckpt.find(prefix + name);
    if (src == nullptr) throw FormatError("checkpoint lacks parameter '" + prefix + name + "'");
    if (src->shape() != t.shape()) {
      throw FormatError("checkpoint parameter '" + prefix + name + "' has shape " + shape_to_string(src->shape()) +
                        ", expected " + shape_to_string(t.shape()));
    }
    std::copy(src->data().begin(), src->data().end(), t.mutable_data().begin());
  }
}

void store_optimizer(Checkpoint& ckpt, const OptimizerState& state) {
  ckpt.meta["optimizer"] = {{"kind", to_string(state.kind)}, {"lr", state.lr},       {"beta1", state.beta1},
                            {"beta2", state.beta2},          {"decay", state.decay}, {"eps", state.eps},
                            {"step", state.step}};
  for (const auto& [name, t] : state.first) ckpt.add("optim/m/" + name, t);
  for (const auto& [name, t] : state.second) ckpt.add("optim/v/" + name, t);
}

OptimizerState restore_optimizer(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("optimizer")) throw FormatError("checkpoint has no optimizer state");
  const auto& o = ckpt.meta["optimizer"];
  OptimizerState s;
  try {
    s.kind = parse_optimizer(o.at("kind").get<std::string>());
    s.lr = o.at("lr").get<double>();
    s.beta1 = o.at("beta1").get<double>();
    s.beta2 = o.at("beta2").get<double>();
    s.decay = o.at("decay").get<double>();
    s.eps = o.at("eps").get<double>();
    s.step = o.at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad optimizer metadata: ") + e.what());
  }
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("optim/m/", 0) == 0) s.first.emplace(name.substr(8), t.clone());
    if (name.rfind("optim/v/", 0) == 0) s.second.emplace(name.substr(8), t.clone());
  }
  return s;
}

}  // namespace mattevit
