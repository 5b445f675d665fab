#include "wmgen/kv_cache.hpp"

#include <cstring>
#include <fstream>

namespace wmgen {

namespace {
template <typename T>
void put(std::vector<unsigned char>& buf, const T& v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}
template <typename T>
T take(const unsigned char*& p, const unsigned char* end) {
  if (p + sizeof(T) > end) throw IoError("truncated KV cache blob");
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}
}  // namespace

std::vector<unsigned char> KVCache::serialize() const {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), {'W', 'M', 'K', 'V', '0', '1'});
  put(buf, n_layers);
  put(buf, n_heads);
  put(buf, head_dim);
  put(buf, static_cast<int64_t>(positions.size()));
  for (int pos : positions) put(buf, static_cast<int64_t>(pos));
  for (const auto& l : layers) {
    for (double d : l.k) put(buf, d);
    for (double d : l.v) put(buf, d);
  }
  return buf;
}

void KVCache::save_binary(const std::string& path) const {
  auto buf = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write KV cache file: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

KVCache KVCache::load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read KV cache file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const unsigned char* p = buf.data();
  const unsigned char* end = p + buf.size();
  if (buf.size() < 6 || std::memcmp(p, "WMKV01", 6) != 0) {
    throw IoError("bad KV cache magic in " + path);
  }
  p += 6;
  KVCache kv;
  kv.n_layers = take<int64_t>(p, end);
  kv.n_heads = take<int64_t>(p, end);
  kv.head_dim = take<int64_t>(p, end);
  const int64_t span = take<int64_t>(p, end);
  kv.positions.reserve(static_cast<size_t>(span));
  for (int64_t i = 0; i < span; ++i) {
    kv.positions.push_back(static_cast<int>(take<int64_t>(p, end)));
  }
  kv.layers.resize(static_cast<size_t>(kv.n_layers));
  const int64_t width = span * kv.n_heads * kv.head_dim;
  for (auto& l : kv.layers) {
    l.k.resize(static_cast<size_t>(width));
    for (auto& d : l.k) d = take<double>(p, end);
    l.v.resize(static_cast<size_t>(width));
    for (auto& d : l.v) d = take<double>(p, end);
  }
  return kv;
}

}  // namespace wmgen
