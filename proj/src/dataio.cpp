// Copyright 2026 The ClusterSeg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "clusterseg/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "endian_io.hpp"
#include "json.hpp"

namespace clusterseg::dataio {

namespace {

using nlohmann::ordered_json;

constexpr char kMagic[4] = {'T', 'S', 'B', '1'};
constexpr std::size_t kHeaderSize = sizeof(kMagic) + sizeof(std::uint64_t);

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                   std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                      std::uint8_t>>>;

// Product of `shape` times `elem`, or nullopt-like false on overflow.
bool checked_byte_length(const std::vector<std::uint64_t>& shape, std::size_t elem,
                         std::uint64_t& out) {
  std::uint64_t n = elem;
  for (std::uint64_t d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) return false;
    n *= d;
  }
  out = n;
  return true;
}

void check_name(const std::string& name) {
  if (name.empty()) throw Error(ErrorCode::kInvalidArgument, "tensor name is empty");
  for (unsigned char c : name) {
    if (c < 0x20 || c > 0x7e) {
      throw Error(ErrorCode::kInvalidArgument, "tensor name must be printable ASCII: " + name);
    }
  }
}

[[noreturn]] void corrupt(const std::string& what) {
  throw Error(ErrorCode::kCorruptManifest, what);
}

std::uint64_t manifest_uint(const ordered_json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_unsigned()) {
    corrupt(std::string("field '") + key + "' missing or not an unsigned integer");
  }
  return it->get<std::uint64_t>();
}

std::string manifest_string(const ordered_json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) corrupt(std::string("field '") + key + "' missing or not a string");
  return it->get<std::string>();
}

template <typename T>
Tensor grid_tensor(const Grid<T>& grid, bool with_channels) {
  std::vector<std::uint64_t> shape{static_cast<std::uint64_t>(grid.height()),
                                   static_cast<std::uint64_t>(grid.width())};
  if (with_channels) shape.push_back(static_cast<std::uint64_t>(grid.channels()));
  return Tensor::from<T>(grid.values(), std::move(shape));
}

Grid<double> f64_grid(const Tensor& t, int channels) {
  const std::size_t rank = channels == 1 ? 2 : 3;
  if (t.shape.size() != rank || (rank == 3 && t.shape[2] != static_cast<std::uint64_t>(channels))) {
    throw Error(ErrorCode::kShapeMismatch, "unexpected tensor rank or channel count");
  }
  Grid<double> g(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]), channels);
  g.values() = t.as<double>();
  return g;
}

Mask u8_grid(const Tensor& t) {
  if (t.shape.size() != 2) throw Error(ErrorCode::kShapeMismatch, "mask tensor must be H x W");
  Mask m(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]));
  m.values() = t.as<std::uint8_t>();
  return m;
}

Tensor label_tensor(const LabelMap& labels) {
  std::vector<std::uint16_t> values(labels.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int v = labels.values()[i];
    if (v < 0 || v > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::kInvalidArgument, "label outside u16 range");
    }
    values[i] = static_cast<std::uint16_t>(v);
  }
  return Tensor::from<std::uint16_t>(values, {static_cast<std::uint64_t>(labels.height()),
                                               static_cast<std::uint64_t>(labels.width())});
}

LabelMap label_grid(const Tensor& t) {
  if (t.shape.size() != 2) throw Error(ErrorCode::kShapeMismatch, "label tensor must be H x W");
  LabelMap labels(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]));
  const auto values = t.as<std::uint16_t>();
  std::copy(values.begin(), values.end(), labels.values().begin());
  return labels;
}

}  // namespace

std::size_t dtype_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kU8: return 1;
    case DType::kU16: return 2;
  }
  return 0;
}

const char* to_string(DType dtype) noexcept {
  switch (dtype) {
    case DType::kF32: return "f32";
    case DType::kF64: return "f64";
    case DType::kU8: return "u8";
    case DType::kU16: return "u16";
  }
  return "?";
}

DType dtype_from_string(std::string_view name) {
  if (name == "f32") return DType::kF32;
  if (name == "f64") return DType::kF64;
  if (name == "u8") return DType::kU8;
  if (name == "u16") return DType::kU16;
  throw Error(ErrorCode::kUnsupportedDtype, "unknown dtype '" + std::string(name) + "'");
}

std::uint64_t Tensor::element_count() const noexcept {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) n *= d;
  return n;
}

template <typename T>
Tensor Tensor::from(std::span<const T> values, std::vector<std::uint64_t> shape) {
  Tensor t;
  t.dtype = DTypeOf<T>::value;
  t.shape = std::move(shape);
  if (t.element_count() != values.size()) {
    throw Error(ErrorCode::kShapeMismatch, "shape does not match element count");
  }
  t.bytes.resize(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<Bits<T>>(values[i]);
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      t.bytes[i * sizeof(T) + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    }
  }
  return t;
}

template <typename T>
std::vector<T> Tensor::as() const {
  if (dtype != DTypeOf<T>::value) {
    throw Error(ErrorCode::kDataMismatch, std::string("tensor has dtype ") + to_string(dtype) +
                                              ", expected " + to_string(DTypeOf<T>::value));
  }
  std::vector<T> out(bytes.size() / sizeof(T));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::bit_cast<T>(detail::decode_le<Bits<T>>(bytes.data() + i * sizeof(T)));
  }
  return out;
}

template Tensor Tensor::from<float>(std::span<const float>, std::vector<std::uint64_t>);
template Tensor Tensor::from<double>(std::span<const double>, std::vector<std::uint64_t>);
template Tensor Tensor::from<std::uint8_t>(std::span<const std::uint8_t>, std::vector<std::uint64_t>);
template Tensor Tensor::from<std::uint16_t>(std::span<const std::uint16_t>, std::vector<std::uint64_t>);
template std::vector<float> Tensor::as<float>() const;
template std::vector<double> Tensor::as<double>() const;
template std::vector<std::uint8_t> Tensor::as<std::uint8_t>() const;
template std::vector<std::uint16_t> Tensor::as<std::uint16_t>() const;

const Tensor& find(const TensorBundle& bundle, std::string_view name) {
  for (const NamedTensor& nt : bundle) {
    if (nt.name == name) return nt.tensor;
  }
  throw Error(ErrorCode::kDataMismatch, "bundle has no tensor '" + std::string(name) + "'");
}

bool contains(const TensorBundle& bundle, std::string_view name) {
  return std::any_of(bundle.begin(), bundle.end(),
                     [&](const NamedTensor& nt) { return nt.name == name; });
}

std::string encode_bundle(const TensorBundle& bundle) {
  ordered_json tensors = ordered_json::object();
  std::uint64_t offset = 0;
  for (const NamedTensor& nt : bundle) {
    check_name(nt.name);
    if (tensors.contains(nt.name)) throw Error(ErrorCode::kDuplicateName, nt.name);
    std::uint64_t length = 0;
    if (!checked_byte_length(nt.tensor.shape, dtype_size(nt.tensor.dtype), length) ||
        length != nt.tensor.bytes.size()) {
      throw Error(ErrorCode::kShapeMismatch, "tensor '" + nt.name + "' byte length does not match shape");
    }
    tensors[nt.name] = {{"dtype", to_string(nt.tensor.dtype)},
                        {"shape", nt.tensor.shape},
                        {"offset", offset},
                        {"length", length},
                        {"layout", "row-major"},
                        {"endianness", "little"}};
    offset += length;
  }
  const ordered_json manifest = {{"format", "TSB1"}, {"tensors", tensors}};
  const std::string text = manifest.dump();

  std::ostringstream os;
  os.write(kMagic, sizeof(kMagic));
  detail::put_le<std::uint64_t>(os, text.size());
  os << text;
  for (const NamedTensor& nt : bundle) {
    os.write(reinterpret_cast<const char*>(nt.tensor.bytes.data()),
             static_cast<std::streamsize>(nt.tensor.bytes.size()));
  }
  return os.str();
}

TensorBundle decode_bundle(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic)) {
    if (bytes == std::string_view(kMagic, bytes.size())) throw Error(ErrorCode::kTruncated, "file shorter than header");
    throw Error(ErrorCode::kBadMagic, "not a tensor bundle");
  }
  if (bytes.substr(0, sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(ErrorCode::kBadMagic, "not a tensor bundle");
  }
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::kTruncated, "file shorter than header");
  const auto manifest_len = detail::decode_le<std::uint64_t>(
      reinterpret_cast<const unsigned char*>(bytes.data() + sizeof(kMagic)));
  if (manifest_len > bytes.size() - kHeaderSize) {
    throw Error(ErrorCode::kTruncated, "manifest extends past end of file");
  }
  const std::string_view text = bytes.substr(kHeaderSize, manifest_len);
  const std::string_view payload = bytes.substr(kHeaderSize + manifest_len);

  const ordered_json manifest = ordered_json::parse(text, nullptr, false);
  if (manifest.is_discarded()) corrupt("manifest is not valid JSON");
  if (!manifest.is_object()) corrupt("manifest is not an object");
  if (manifest.value("format", std::string()) != "TSB1") corrupt("manifest format tag missing");
  const auto tensors_it = manifest.find("tensors");
  if (tensors_it == manifest.end() || !tensors_it->is_object()) corrupt("manifest has no tensor table");

  struct Entry {
    std::string name;
    DType dtype;
    std::vector<std::uint64_t> shape;
    std::uint64_t offset;
    std::uint64_t length;
  };
  std::vector<Entry> entries;
  for (const auto& [name, spec] : tensors_it->items()) {
    if (!spec.is_object()) corrupt("entry '" + name + "' is not an object");
    Entry e;
    e.name = name;
    try {
      check_name(name);
    } catch (const Error&) {
      corrupt("invalid tensor name");
    }
    const std::string dtype = manifest_string(spec, "dtype");
    const auto shape_it = spec.find("shape");
    if (shape_it == spec.end() || !shape_it->is_array()) corrupt("entry '" + name + "' has no shape");
    for (const auto& d : *shape_it) {
      if (!d.is_number_unsigned()) corrupt("entry '" + name + "' has a non-integer dimension");
      e.shape.push_back(d.get<std::uint64_t>());
    }
    e.offset = manifest_uint(spec, "offset");
    e.length = manifest_uint(spec, "length");
    if (manifest_string(spec, "layout") != "row-major") corrupt("unsupported layout");
    if (manifest_string(spec, "endianness") != "little") corrupt("unsupported endianness");
    e.dtype = dtype_from_string(dtype);
    std::uint64_t expected = 0;
    if (!checked_byte_length(e.shape, dtype_size(e.dtype), expected) || expected != e.length) {
      corrupt("entry '" + name + "' length does not match its shape");
    }
    entries.push_back(std::move(e));
  }

  // Offsets must tile the payload without overlap.
  std::vector<const Entry*> by_offset;
  for (const Entry& e : entries) by_offset.push_back(&e);
  std::sort(by_offset.begin(), by_offset.end(),
            [](const Entry* a, const Entry* b) { return a->offset < b->offset; });
  std::uint64_t end = 0;
  for (const Entry* e : by_offset) {
    if (e->offset < end) corrupt("tensor '" + e->name + "' overlaps another tensor");
    if (e->length > std::numeric_limits<std::uint64_t>::max() - e->offset) corrupt("offset overflow");
    end = e->offset + e->length;
  }
  if (end > payload.size()) throw Error(ErrorCode::kTruncated, "payload shorter than manifest declares");
  if (end < payload.size()) corrupt("trailing bytes after payload");

  TensorBundle bundle;
  bundle.reserve(entries.size());
  for (Entry& e : entries) {
    NamedTensor nt;
    nt.name = std::move(e.name);
    nt.tensor.dtype = e.dtype;
    nt.tensor.shape = std::move(e.shape);
    const auto* first = reinterpret_cast<const unsigned char*>(payload.data() + e.offset);
    nt.tensor.bytes.assign(first, first + e.length);
    bundle.push_back(std::move(nt));
  }
  return bundle;
}

void write_bundle(const std::string& path, const TensorBundle& bundle) {
  write_text(path, encode_bundle(bundle));
}

TensorBundle read_bundle(const std::string& path) { return decode_bundle(read_text(path)); }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path);
  return data;
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

TensorBundle frame_to_bundle(const scenegen::FrameBundle& frame, const annotation::Annotation& ann) {
  const auto h = static_cast<std::uint64_t>(frame.height());
  const auto w = static_cast<std::uint64_t>(frame.width());
  const auto k = static_cast<std::uint64_t>(frame.object_count());

  std::vector<std::uint8_t> amodal;
  amodal.reserve(k * h * w);
  for (const Mask& m : frame.amodal_masks) amodal.insert(amodal.end(), m.values().begin(), m.values().end());
  std::vector<double> per_object;
  for (const auto& xi : ann.per_object_xi) per_object.insert(per_object.end(), xi.values.begin(), xi.values.end());

  TensorBundle b;
  b.push_back({"rgb", grid_tensor(frame.rgb, true)});
  b.push_back({"depth", grid_tensor(frame.depth, false)});
  b.push_back({"xyz", grid_tensor(frame.xyz, true)});
  b.push_back({"instance_map", label_tensor(frame.instance_map)});
  b.push_back({"amodal_masks", Tensor::from<std::uint8_t>(amodal, {k, h, w})});
  b.push_back({"occlusion_scores", Tensor::from<double>(frame.occlusion_scores, {k})});
  b.push_back({"xi_map", grid_tensor(ann.xi_map, true)});
  b.push_back({"eta_gt", grid_tensor(ann.eta_gt, false)});
  b.push_back({"b_map", grid_tensor(ann.b_map, false)});
  b.push_back({"fg_mask", grid_tensor(ann.fg_mask, false)});
  b.push_back({"per_object_xi", Tensor::from<double>(per_object, {ann.per_object_xi.size(), 9})});
  return b;
}

std::pair<scenegen::FrameBundle, annotation::Annotation> frame_from_bundle(const TensorBundle& bundle) {
  scenegen::FrameBundle frame;
  frame.rgb = f64_grid(find(bundle, "rgb"), 3);
  frame.depth = f64_grid(find(bundle, "depth"), 1);
  frame.xyz = f64_grid(find(bundle, "xyz"), 3);
  frame.instance_map = label_grid(find(bundle, "instance_map"));

  const Tensor& amodal = find(bundle, "amodal_masks");
  if (amodal.shape.size() != 3) throw Error(ErrorCode::kShapeMismatch, "amodal_masks must be K x H x W");
  const int h = static_cast<int>(amodal.shape[1]);
  const int w = static_cast<int>(amodal.shape[2]);
  const auto amodal_values = amodal.as<std::uint8_t>();
  for (std::uint64_t k = 0; k < amodal.shape[0]; ++k) {
    Mask m(h, w);
    std::copy_n(amodal_values.begin() + static_cast<std::ptrdiff_t>(k * m.size()), m.size(), m.values().begin());
    frame.amodal_masks.push_back(std::move(m));
  }
  frame.occlusion_scores = find(bundle, "occlusion_scores").as<double>();

  annotation::Annotation ann;
  ann.xi_map = f64_grid(find(bundle, "xi_map"), 9);
  ann.eta_gt = u8_grid(find(bundle, "eta_gt"));
  ann.b_map = f64_grid(find(bundle, "b_map"), 1);
  ann.fg_mask = u8_grid(find(bundle, "fg_mask"));
  const auto per_object = find(bundle, "per_object_xi").as<double>();
  for (std::size_t i = 0; i + 9 <= per_object.size(); i += 9) {
    geometry::ObjectFeature xi;
    std::copy_n(per_object.begin() + static_cast<std::ptrdiff_t>(i), 9, xi.values.begin());
    ann.per_object_xi.push_back(xi);
  }

  const bool consistent = frame.depth.same_extent(frame.rgb) && frame.depth.same_extent(frame.xyz) &&
                          frame.depth.same_extent(frame.instance_map) &&
                          frame.depth.same_extent(ann.fg_mask) && frame.depth.same_extent(ann.eta_gt) &&
                          frame.depth.same_extent(ann.b_map) && frame.depth.same_extent(ann.xi_map) &&
                          frame.occlusion_scores.size() == frame.amodal_masks.size() &&
                          ann.per_object_xi.size() == frame.amodal_masks.size() &&
                          (frame.amodal_masks.empty() || frame.depth.same_shape(h, w));
  if (!consistent) throw Error(ErrorCode::kShapeMismatch, "frame bundle tensors disagree in size");
  return {std::move(frame), std::move(ann)};
}

TensorBundle segmentation_to_bundle(const clustering::Segmentation& seg) {
  std::vector<std::uint16_t> seeds;
  for (const Pixel& p : seg.seeds) {
    seeds.push_back(static_cast<std::uint16_t>(p.row));
    seeds.push_back(static_cast<std::uint16_t>(p.col));
  }
  TensorBundle b;
  b.push_back({"labels", label_tensor(seg.labels)});
  b.push_back({"scores", Tensor::from<double>(seg.scores, {seg.scores.size()})});
  b.push_back({"seeds", Tensor::from<std::uint16_t>(seeds, {seg.seeds.size(), 2})});
  return b;
}

clustering::Segmentation segmentation_from_bundle(const TensorBundle& bundle) {
  clustering::Segmentation seg;
  seg.labels = label_grid(find(bundle, "labels"));
  seg.scores = find(bundle, "scores").as<double>();
  const auto seeds = find(bundle, "seeds").as<std::uint16_t>();
  for (std::size_t i = 0; i + 1 < seeds.size(); i += 2) seg.seeds.push_back({seeds[i], seeds[i + 1]});
  for (int v : seg.labels.values()) {
    if (v > seg.instance_count()) throw Error(ErrorCode::kDataMismatch, "label without a score");
  }
  return seg;
}

}  // namespace clusterseg::dataio
