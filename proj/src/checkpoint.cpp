#include "xdomid/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "xdomid/tensor_io.hpp"

namespace xdomid {

namespace {

constexpr char kMagic[4] = {'X', 'D', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

struct Entry {
  std::string name;
  TensorPtr tensor;
};

std::vector<Entry> flatten(const ModelBundle& b) {
  std::vector<Entry> out;
  auto push = [&out](const ParamSet& set, const std::string& prefix) {
    for (const auto& p : set.items()) out.push_back({prefix + p.name, p.tensor});
  };
  push(b.trunk_v, "trunk_v.");
  push(b.trunk_t, "trunk_t.");
  push(b.compression, "comp.");
  push(b.rst, "rst.");
  push(b.head, "head.");
  push(b.detector, "det.");
  return out;
}

std::uint64_t payload_hash(const std::vector<Entry>& entries) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& e : entries) {
    mix(e.name.data(), e.name.size());
    mix(e.tensor->data.data(), e.tensor->data.size() * sizeof(double));
  }
  return h;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::map<std::string, std::string> parse_meta(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& meta_field(const std::map<std::string, std::string>& kv,
                              const std::string& key, const std::string& path) {
  auto it = kv.find(key);
  XD_CHECK(it != kv.end(), path + ": checkpoint metadata missing field '" + key + "'");
  return it->second;
}

}  // namespace

void save_checkpoint(const ModelBundle& bundle, const std::string& path) {
  auto entries = flatten(bundle);
  std::string meta;
  meta += "version=" + std::to_string(kVersion) + "\n";
  meta += "direction=" + direction_name(bundle.direction) + "\n";
  meta += "n_identities=" + std::to_string(bundle.n_identities) + "\n";
  meta += "trunk_blocks=" + join_ints(bundle.trunk_cfg.blocks) + "\n";
  meta += "trunk_depth=" + std::to_string(bundle.trunk_cfg.depth) + "\n";
  meta += "trunk_input=" + std::to_string(bundle.trunk_cfg.input_size) + "\n";
  meta += "hash=" + std::to_string(payload_hash(entries)) + "\n";

  std::ofstream out(path, std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + path);
  out.write(kMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  // Manifest: name, shape, byte offset of each payload record.
  write_u32(out, static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    write_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_u32(out, static_cast<std::uint32_t>(e.tensor->shape.size()));
    for (int ext : e.tensor->shape) write_u64(out, static_cast<std::uint64_t>(ext));
    write_u64(out, offset);
    offset += 4 + 4 + 8 * e.tensor->shape.size() + 8 * e.tensor->size();
  }
  for (const auto& e : entries) write_tensor(out, *e.tensor);
  XD_CHECK(out.good(), "write failed: " + path);
}

ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  XD_CHECK(in.good(), "cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  XD_CHECK(in.good() && std::memcmp(magic, kMagic, 4) == 0,
           path + ": not an XDC1 checkpoint (bad magic)");
  std::uint32_t meta_len = read_u32(in);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), meta_len);
  XD_CHECK(in.good(), path + ": truncated metadata");
  auto kv = parse_meta(meta);
  XD_CHECK(meta_field(kv, "version", path) == std::to_string(kVersion),
           path + ": version mismatch (field 'version': got " + kv["version"] +
               ", expected " + std::to_string(kVersion) + ")");

  ModelBundle bundle;
  bundle.direction = parse_direction(meta_field(kv, "direction", path));
  bundle.n_identities = std::stoi(meta_field(kv, "n_identities", path));
  bundle.trunk_cfg.blocks = parse_ints(meta_field(kv, "trunk_blocks", path));
  bundle.trunk_cfg.depth = std::stoi(meta_field(kv, "trunk_depth", path));
  bundle.trunk_cfg.input_size = std::stoi(meta_field(kv, "trunk_input", path));

  std::uint32_t n_entries = read_u32(in);
  struct ManifestRow {
    std::string name;
    std::vector<int> shape;
    std::uint64_t offset;
  };
  std::vector<ManifestRow> rows(n_entries);
  for (auto& r : rows) {
    std::uint32_t name_len = read_u32(in);
    XD_CHECK(name_len < 4096, path + ": implausible name length");
    r.name.resize(name_len);
    in.read(r.name.data(), name_len);
    std::uint32_t rank = read_u32(in);
    XD_CHECK(in.good() && rank <= 8, path + ": bad manifest entry");
    r.shape.resize(rank);
    for (auto& ext : r.shape) ext = static_cast<int>(read_u64(in));
    r.offset = read_u64(in);
  }

  std::vector<Entry> entries;
  for (const auto& r : rows) {
    TensorPtr t;
    try {
      t = read_tensor(in);
    } catch (const std::exception& e) {
      fail(path + ": truncated or corrupt payload for tensor '" + r.name +
           "': " + e.what());
    }
    XD_CHECK(t->shape == r.shape, path + ": tensor '" + r.name +
                                      "' payload shape " + shape_str(t->shape) +
                                      " disagrees with manifest " +
                                      shape_str(r.shape));
    entries.push_back({r.name, t});
  }
  XD_CHECK(std::to_string(payload_hash(entries)) == meta_field(kv, "hash", path),
           path + ": payload mismatch (field 'hash')");

  for (const auto& e : entries) {
    auto dot = e.name.find('.');
    XD_CHECK(dot != std::string::npos, path + ": unprefixed tensor " + e.name);
    std::string prefix = e.name.substr(0, dot);
    std::string rest = e.name.substr(dot + 1);
    if (prefix == "trunk_v") bundle.trunk_v.add(rest, e.tensor);
    else if (prefix == "trunk_t") bundle.trunk_t.add(rest, e.tensor);
    else if (prefix == "comp") bundle.compression.add(rest, e.tensor);
    else if (prefix == "rst") bundle.rst.add(rest, e.tensor);
    else if (prefix == "head") bundle.head.add(rest, e.tensor);
    else if (prefix == "det") bundle.detector.add(rest, e.tensor);
    else fail(path + ": unknown component prefix '" + prefix + "'");
  }
  return bundle;
}

}  // namespace xdomid
