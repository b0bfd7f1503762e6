// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace binsed {

const char* layering_mode_name(LayeringMode m) {
  return m == LayeringMode::volume ? "volume" : "concat";
}

LayeringMode parse_layering_mode(const std::string& s) {
  if (s == "volume") return LayeringMode::volume;
  if (s == "concat") return LayeringMode::concat;
  throw ValidationError("unknown layering mode '" + s + "' (expected volume or concat)");
}

int BranchSpec::out_width() const {
  int w = input_length;
  for (const auto& b : blocks) w /= b.pool;
  return w;
}

void BranchSpec::validate() const {
  if (feature.empty()) throw ValidationError("branch: empty feature name");
  if (input_length <= 0 || input_layers <= 0) {
    throw ValidationError("branch '" + feature + "': input dimensions must be positive");
  }
  if (blocks.empty()) throw ValidationError("branch '" + feature + "': needs at least one block");
  int w = input_length;
  for (const auto& b : blocks) {
    if (b.filters < 1) throw ValidationError("branch '" + feature + "': filters must be >= 1");
    if (b.kh < 1 || b.kw < 1 || b.kh % 2 == 0 || b.kw % 2 == 0) {
      throw ValidationError("branch '" + feature + "': kernel sides must be odd and positive");
    }
    if (b.pool < 1 || w % b.pool != 0) {
      throw ValidationError("branch '" + feature + "': pool factors must divide the width");
    }
    w /= b.pool;
  }
}

namespace {

struct FeatureInfo {
  const char* name;
  FeatureType type;
  int length;
  int layers;
};

constexpr FeatureInfo kFeatures[] = {
    {"mel", FeatureType::mel, 40, 2},      {"mel-mono", FeatureType::mel, 40, 1},
    {"tdoa", FeatureType::tdoa, 5, 3},     {"gcc", FeatureType::gcc, 60, 3},
    {"domfreq", FeatureType::domfreq, 3, 4}, {"acr", FeatureType::acr, 400, 2},
};

const FeatureInfo* find_feature(const std::string& name) {
  for (const auto& f : kFeatures) {
    if (name == f.name) return &f;
  }
  return nullptr;
}

/// Pool factorizations that bring each width down to 5 over three blocks.
std::vector<int> pool_plan(const std::string& feature, LayeringMode mode) {
  const bool concat = mode == LayeringMode::concat;
  if (feature == "mel") return concat ? std::vector<int>{2, 2, 4} : std::vector<int>{2, 2, 2};
  if (feature == "mel-mono") return {2, 2, 2};  // single layer, both modes agree
  if (feature == "gcc") return concat ? std::vector<int>{4, 3, 3} : std::vector<int>{2, 2, 3};
  if (feature == "acr") return concat ? std::vector<int>{5, 4, 8} : std::vector<int>{5, 4, 4};
  return {1};  // tdoa, domfreq: one block, no pooling
}

}  // namespace

bool is_known_feature(const std::string& name) { return find_feature(name) != nullptr; }

FeatureType feature_type_of(const std::string& name) {
  const auto* f = find_feature(name);
  if (!f) throw ValidationError("unknown feature '" + name + "'");
  return f->type;
}

std::pair<int, int> feature_volume_dims(const std::string& name) {
  const auto* f = find_feature(name);
  if (!f) throw ValidationError("unknown feature '" + name + "'");
  return {f->length, f->layers};
}

BranchSpec make_branch_spec(const std::string& feature, LayeringMode mode, int filters) {
  const auto* info = find_feature(feature);
  if (!info) throw ValidationError("unknown feature '" + feature + "'");

  BranchSpec spec;
  spec.feature = feature;
  spec.type = info->type;
  if (mode == LayeringMode::concat) {
    spec.input_length = info->length * info->layers;
    spec.input_layers = 1;
  } else {
    spec.input_length = info->length;
    spec.input_layers = info->layers;
  }
  for (int p : pool_plan(feature, mode)) {
    ConvBlockSpec blk;
    blk.filters = filters;
    blk.pool = p;
    spec.blocks.push_back(blk);
  }
  spec.validate();
  return spec;
}

void ModelConfig::validate() const {
  if (branches.empty()) throw ValidationError("model: needs at least one feature branch");
  if (class_list.empty()) throw ValidationError("model: empty class list");
  if (lstm_units < 1) throw ValidationError("model: lstm_units must be >= 1");
  std::set<std::string> names;
  for (const auto& b : branches) {
    b.validate();
    if (!names.insert(b.feature).second) {
      throw ValidationError("model: duplicate branch '" + b.feature + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint format: "SEDM", u16 version, u32 descriptor length, descriptor
// text, then named float32 blocks (u32 name length, name, u64 count, data).
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'E', 'D', 'M'};
constexpr std::uint16_t kVersion = 1;

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

std::string describe_branch(const BranchSpec& b) {
  std::ostringstream out;
  out << b.feature << ":type=" << static_cast<int>(b.type) << ",L=" << b.input_length
      << ",C=" << b.input_layers << ",blocks=";
  for (std::size_t i = 0; i < b.blocks.size(); ++i) {
    const auto& blk = b.blocks[i];
    if (i) out << ';';
    out << blk.filters << 'x' << blk.kh << 'x' << blk.kw << 'p' << blk.pool;
  }
  return out.str();
}

BranchSpec parse_branch(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw FormatError("checkpoint: malformed branch descriptor");
  BranchSpec b;
  b.feature = text.substr(0, colon);
  for (const auto& kv : split(text.substr(colon + 1), ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: malformed branch field");
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    if (key == "type") {
      b.type = static_cast<FeatureType>(std::stoi(val));
    } else if (key == "L") {
      b.input_length = std::stoi(val);
    } else if (key == "C") {
      b.input_layers = std::stoi(val);
    } else if (key == "blocks") {
      for (const auto& bs : split(val, ';')) {
        ConvBlockSpec blk;
        if (std::sscanf(bs.c_str(), "%dx%dx%dp%d", &blk.filters, &blk.kh, &blk.kw, &blk.pool) !=
            4) {
          throw FormatError("checkpoint: malformed block descriptor '" + bs + "'");
        }
        b.blocks.push_back(blk);
      }
    }
  }
  b.validate();
  return b;
}

void write_block(std::ofstream& out, const std::string& name, const float* data,
                 std::size_t count) {
  const auto name_len = static_cast<std::uint32_t>(name.size());
  out.write(reinterpret_cast<const char*>(&name_len), 4);
  out.write(name.data(), name_len);
  const auto n = static_cast<std::uint64_t>(count);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
}

struct BlockReader {
  std::ifstream& in;
  const std::filesystem::path& path;

  std::pair<std::string, std::vector<float>> next() {
    std::uint32_t name_len = 0;
    if (!in.read(reinterpret_cast<char*>(&name_len), 4)) {
      throw IoError(path.string() + ": truncated checkpoint (missing block)");
    }
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw IoError(path.string() + ": truncated checkpoint block name");
    }
    std::uint64_t count = 0;
    if (!in.read(reinterpret_cast<char*>(&count), 8)) {
      throw IoError(path.string() + ": truncated checkpoint block header");
    }
    std::vector<float> data(count);
    if (count > 0 &&
        !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * 4))) {
      throw IoError(path.string() + ": truncated checkpoint block payload");
    }
    return {std::move(name), std::move(data)};
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const Checkpoint& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  std::ostringstream desc;
  desc << "format=1\n";
  desc << "sample_rate=" << meta.sample_rate << "\n";
  desc << "hop=" << format_double(meta.hop, 6) << "\n";
  desc << "layering=" << layering_mode_name(model.config.layering) << "\n";
  desc << "lstm_units=" << model.config.lstm_units << "\n";
  desc << "normalize=" << (meta.normalize ? 1 : 0) << "\n";
  desc << "classes=" << join(model.config.class_list, ',') << "\n";
  for (const auto& b : model.config.branches) desc << "branch=" << describe_branch(b) << "\n";
  for (const auto& [name, stats] : meta.norms) {
    desc << "norm=" << name << ":type=" << static_cast<int>(stats.type) << ",L=" << stats.length
         << ",C=" << stats.layers << "\n";
  }
  const std::string desc_str = desc.str();

  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), 2);
  const auto desc_len = static_cast<std::uint32_t>(desc_str.size());
  out.write(reinterpret_cast<const char*>(&desc_len), 4);
  out.write(desc_str.data(), desc_len);

  for (const auto& blk : model.params.blocks) {
    write_block(out, blk.name, model.params.data.data() + blk.offset, blk.count);
  }
  for (const auto& blk : model.state.blocks) {
    write_block(out, blk.name, model.state.data.data() + blk.offset, blk.count);
  }
  for (const auto& [name, stats] : meta.norms) {
    write_block(out, "norm." + name + ".mean", stats.mean.data(), stats.mean.size());
    write_block(out, "norm." + name + ".stddev", stats.stddev.data(), stats.stddev.size());
  }
  if (!out) throw IoError("write failed: " + path.string());
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a model checkpoint");
  }
  std::uint16_t version = 0;
  if (!in.read(reinterpret_cast<char*>(&version), 2) || version != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version");
  }
  std::uint32_t desc_len = 0;
  if (!in.read(reinterpret_cast<char*>(&desc_len), 4)) {
    throw IoError(path.string() + ": truncated checkpoint header");
  }
  std::string desc(desc_len, '\0');
  if (!in.read(desc.data(), desc_len)) {
    throw IoError(path.string() + ": truncated checkpoint descriptor");
  }

  ModelConfig config;
  Checkpoint meta;
  std::vector<std::pair<std::string, NormStats>> norm_order;
  std::istringstream lines(desc);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "sample_rate") {
      meta.sample_rate = std::stoi(val);
    } else if (key == "hop") {
      meta.hop = std::stod(val);
    } else if (key == "layering") {
      config.layering = parse_layering_mode(val);
    } else if (key == "lstm_units") {
      config.lstm_units = std::stoi(val);
    } else if (key == "normalize") {
      meta.normalize = val == "1";
    } else if (key == "classes") {
      config.class_list = split(val, ',');
    } else if (key == "branch") {
      config.branches.push_back(parse_branch(val));
    } else if (key == "norm") {
      const auto colon = val.find(':');
      if (colon == std::string::npos) throw FormatError("checkpoint: malformed norm descriptor");
      NormStats st;
      const std::string name = val.substr(0, colon);
      for (const auto& kv : split(val.substr(colon + 1), ',')) {
        const auto e2 = kv.find('=');
        const std::string k2 = kv.substr(0, e2);
        const std::string v2 = kv.substr(e2 + 1);
        if (k2 == "type") st.type = static_cast<FeatureType>(std::stoi(v2));
        if (k2 == "L") st.length = std::stoi(v2);
        if (k2 == "C") st.layers = std::stoi(v2);
      }
      norm_order.emplace_back(name, std::move(st));
    }
  }

  LoadedModel loaded{Model<float>(config), meta};
  loaded.meta.config = loaded.model.config;

  BlockReader reader{in, path};
  for (const auto& blk : loaded.model.params.blocks) {
    auto [name, data] = reader.next();
    if (name != blk.name || data.size() != blk.count) {
      throw FormatError(path.string() + ": checkpoint block mismatch, expected '" + blk.name +
                        "' (" + std::to_string(blk.count) + " values), found '" + name + "' (" +
                        std::to_string(data.size()) + ")");
    }
    std::copy(data.begin(), data.end(), loaded.model.params.data.begin() + blk.offset);
  }
  for (const auto& blk : loaded.model.state.blocks) {
    auto [name, data] = reader.next();
    if (name != blk.name || data.size() != blk.count) {
      throw FormatError(path.string() + ": checkpoint state block mismatch at '" + blk.name + "'");
    }
    std::copy(data.begin(), data.end(), loaded.model.state.data.begin() + blk.offset);
  }
  for (auto& [name, stats] : norm_order) {
    auto [mname, mean] = reader.next();
    auto [sname, sd] = reader.next();
    if (mname != "norm." + name + ".mean" || sname != "norm." + name + ".stddev") {
      throw FormatError(path.string() + ": checkpoint norm block mismatch for '" + name + "'");
    }
    const auto cells = static_cast<std::size_t>(stats.length) * stats.layers;
    if (mean.size() != cells || sd.size() != cells) {
      throw FormatError(path.string() + ": norm block size mismatch for '" + name + "'");
    }
    stats.mean = std::move(mean);
    stats.stddev = std::move(sd);
    loaded.meta.norms.emplace(name, std::move(stats));
  }
  return loaded;
}

}  // namespace binsed
