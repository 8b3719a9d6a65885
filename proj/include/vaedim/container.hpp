#pragma once
// On-disk container shared by datasets and checkpoints:
//
//   bytes 0..7    magic
//   bytes 8..15   uint64, little-endian: header length H
//   bytes 16..    UTF-8 JSON header
//   then          raw blocks, little-endian, in header["blocks"] order
//
// Block dtypes: "f64" (IEEE double) and "i64". The header's meta object is
// caller-defined. Readers validate magic, dtype and payload sizes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaedim/tensor.hpp"

namespace vaedim {

using json = nlohmann::json;

class io_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_words_le(std::ofstream& out, const void* data,
                           std::size_t words) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(static_cast<const char*>(data),
              static_cast<std::streamsize>(words * 8));
  } else {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::vector<unsigned char> buf(words * 8);
    for (std::size_t w = 0; w < words; ++w)
      for (int b = 0; b < 8; ++b) buf[w * 8 + b] = p[w * 8 + (7 - b)];
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
}

inline void read_words_le(std::ifstream& in, void* data, std::size_t words) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(words * 8));
  if (!in) throw io_error("container: truncated block");
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char* p = static_cast<unsigned char*>(data);
    for (std::size_t w = 0; w < words; ++w)
      for (int b = 0; b < 4; ++b)
        std::swap(p[w * 8 + b], p[w * 8 + (7 - b)]);
  }
}

}  // namespace detail

class ContainerWriter {
 public:
  ContainerWriter(std::string path, std::string magic8)
      : path_(std::move(path)), magic_(std::move(magic8)) {
    if (magic_.size() != 8)
      throw std::invalid_argument("container magic must be 8 bytes");
  }

  void set_meta(json meta) { meta_ = std::move(meta); }

  void add_f64(const std::string& name, const Tensor& t) {
    blocks_.push_back({name, "f64", t.shape()});
    f64_.push_back(&t);
    order_.push_back('f');
  }

  void add_i64(const std::string& name, const std::vector<std::int64_t>& v) {
    blocks_.push_back({name, "i64", Shape{v.size()}});
    i64_.push_back(&v);
    order_.push_back('i');
  }

  void finish() {
    json header;
    header["meta"] = meta_;
    header["blocks"] = json::array();
    for (const auto& b : blocks_) {
      json jb;
      jb["name"] = b.name;
      jb["dtype"] = b.dtype;
      jb["shape"] = b.shape;
      header["blocks"].push_back(jb);
    }
    const std::string htext = header.dump();
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("container: cannot open " + path_ + " for write");
    out.write(magic_.data(), 8);
    std::uint64_t hlen = htext.size();
    if constexpr (std::endian::native == std::endian::big) {
      std::uint64_t swapped = 0;
      for (int b = 0; b < 8; ++b)
        swapped |= ((hlen >> (8 * b)) & 0xffull) << (8 * (7 - b));
      hlen = swapped;
    }
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    std::size_t fi = 0, ii = 0;
    for (char kind : order_) {
      if (kind == 'f') {
        const Tensor* t = f64_[fi++];
        detail::write_words_le(out, t->data(), t->numel());
      } else {
        const auto* v = i64_[ii++];
        detail::write_words_le(out, v->data(), v->size());
      }
    }
    if (!out) throw io_error("container: write failed for " + path_);
  }

 private:
  struct Block {
    std::string name, dtype;
    Shape shape;
  };
  std::string path_, magic_;
  json meta_;
  std::vector<Block> blocks_;
  std::vector<const Tensor*> f64_;
  std::vector<const std::vector<std::int64_t>*> i64_;
  std::vector<char> order_;
};

struct Container {
  json meta;
  std::map<std::string, Tensor> f64;
  std::map<std::string, std::vector<std::int64_t>> i64;

  bool has_f64(const std::string& name) const { return f64.count(name) > 0; }

  static Container read(const std::string& path, const std::string& magic8) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("container: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != magic8)
      throw io_error("container: bad magic in " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    if constexpr (std::endian::native == std::endian::big) {
      std::uint64_t swapped = 0;
      for (int b = 0; b < 8; ++b)
        swapped |= ((hlen >> (8 * b)) & 0xffull) << (8 * (7 - b));
      hlen = swapped;
    }
    if (!in || hlen > (1ull << 31)) throw io_error("container: bad header length");
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw io_error("container: truncated header");
    json header = json::parse(htext);
    Container c;
    c.meta = header.at("meta");
    for (const auto& jb : header.at("blocks")) {
      const std::string name = jb.at("name");
      const std::string dtype = jb.at("dtype");
      Shape shape = jb.at("shape").get<Shape>();
      const std::size_t count = shape_numel(shape);
      if (dtype == "f64") {
        Tensor t(shape);
        detail::read_words_le(in, t.data(), count);
        c.f64.emplace(name, std::move(t));
      } else if (dtype == "i64") {
        std::vector<std::int64_t> v(count);
        detail::read_words_le(in, v.data(), count);
        c.i64.emplace(name, std::move(v));
      } else {
        throw io_error("container: unknown dtype " + dtype);
      }
    }
    return c;
  }
};

}  // namespace vaedim
