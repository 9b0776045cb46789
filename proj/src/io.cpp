#include "avcl/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace avcl {

namespace {

template <typename T>
T byteswap(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(bool little_endian = true) {
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("unexpected end of data");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if (little_endian != (std::endian::native == std::endian::little)) v = byteswap(v);
    return v;
  }

  std::string take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("unexpected end of data");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  // Whitespace-delimited header token; consumes exactly one trailing whitespace byte.
  std::string token() {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) throw FormatError("truncated header");
    std::string t = bytes_.substr(start, pos_ - start);
    if (pos_ < bytes_.size()) ++pos_;
    return t;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

int parse_dimension(const std::string& s) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    throw FormatError("bad PFM dimension '" + s + "'");
  }
  if (used != s.size() || v <= 0 || v > (1 << 20)) throw FormatError("bad PFM dimension '" + s + "'");
  return static_cast<int>(v);
}

std::vector<double> config_values(const ModelConfig& c) {
  return {static_cast<double>(c.in_channels),   static_cast<double>(c.trunk_channels),
          static_cast<double>(c.trunk_layers),  static_cast<double>(c.head_channels),
          static_cast<double>(c.depth_outputs), c.pose_range.rot_max,
          c.pose_range.trans_max};
}

}  // namespace

std::string encode_pfm(const DepthMap& map) {
  std::string out = "Pf\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n-1.0\n";
  out.reserve(out.size() + map.size() * sizeof(float));
  for (int y = map.height() - 1; y >= 0; --y)
    for (int x = 0; x < map.width(); ++x) {
      const std::size_t i = map.index(x, y);
      put_le<float>(out, map.valid(i) ? static_cast<float>(map[i]) : 0.0f);
    }
  return out;
}

DepthMap decode_pfm(const std::string& bytes) {
  Reader r(bytes);
  const std::string magic = r.token();
  if (magic == "PF") throw FormatError("color PFM is not a depth map");
  if (magic != "Pf") throw FormatError("not a PFM file");
  const int w = parse_dimension(r.token());
  const int h = parse_dimension(r.token());
  const std::string scale_text = r.token();
  double scale = 0.0;
  try {
    scale = std::stod(scale_text);
  } catch (const std::exception&) {
    throw FormatError("bad PFM scale '" + scale_text + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("bad PFM scale '" + scale_text + "'");
  const bool little = scale < 0.0;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (r.remaining() != n * sizeof(float)) throw FormatError("PFM payload size does not match its header");
  std::vector<double> values(n);
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x) values[static_cast<std::size_t>(y) * w + x] = r.get<float>(little);
  DepthMap map = DepthMap::from_values(w, h, std::move(values));
  for (std::size_t i = 0; i < map.size(); ++i)
    if (!map.valid(i)) map.invalidate(i);
  return map;
}

std::string encode_pfm_image(const ad::Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("encode_pfm_image: expected [3, H, W]");
  const std::size_t H = image.dim(1), W = image.dim(2);
  std::string out = "PF\n" + std::to_string(W) + " " + std::to_string(H) + "\n-1.0\n";
  const auto d = image.data();
  for (std::size_t y = H; y-- > 0;)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) put_le<float>(out, static_cast<float>(d[(c * H + y) * W + x]));
  return out;
}

void write_pfm(const std::filesystem::path& path, const DepthMap& map) { write_file(path, encode_pfm(map)); }

DepthMap read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::string out = "AVCL";
  put_le<std::uint32_t>(out, kCheckpointVersion);
  auto params = model.named_parameters();
  const std::vector<double> meta = config_values(model.config());
  params.insert(params.begin(), {"meta.config", ad::Tensor::from({meta.size()}, meta)});
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) put_le<double>(out, v);
  }
  write_file(path, out);
}

Model load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes);
  if (r.take(4) != "AVCL") throw FormatError("not an AVCL checkpoint: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  std::vector<std::pair<std::string, ad::Tensor>> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = r.get<std::uint32_t>();
    std::string name = r.take(len);
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw FormatError("bad tensor rank in " + name);
    ad::Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    const std::size_t n = ad::shape_size(shape);
    if (n * sizeof(double) > r.remaining()) throw FormatError("truncated tensor " + name);
    std::vector<double> data(n);
    for (double& v : data) v = r.get<double>();
    tensors.emplace_back(std::move(name), ad::Tensor::from(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint tensors");
  if (tensors.empty() || tensors.front().first != "meta.config" || tensors.front().second.size() != 7)
    throw FormatError("checkpoint lacks its model configuration");

  const auto m = tensors.front().second.data();
  ModelConfig config;
  config.in_channels = static_cast<int>(m[0]);
  config.trunk_channels = static_cast<int>(m[1]);
  config.trunk_layers = static_cast<int>(m[2]);
  config.head_channels = static_cast<int>(m[3]);
  config.depth_outputs = static_cast<int>(m[4]);
  config.pose_range = PoseRange{m[5], m[6]};
  Model model = Model::init(config, 0);
  auto params = model.named_parameters();
  if (params.size() + 1 != tensors.size()) throw FormatError("checkpoint tensor count does not match its model");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& [name, dst] = params[k];
    const auto& [src_name, src] = tensors[k + 1];
    if (name != src_name || dst.shape() != src.shape())
      throw FormatError("checkpoint tensor " + src_name + " does not match model parameter " + name);
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  }
  return model;
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw FormatError("line " + std::to_string(lineno) + ": duplicate key " + key);
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) { return parse_key_values(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace avcl
