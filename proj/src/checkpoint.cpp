#include "pim/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pim {

namespace {

static_assert(sizeof(double) == 8);

// Host is little-endian on every target we build for; byte-swap otherwise.
void to_little_endian(std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (double& v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      bits = __builtin_bswap64(bits);
      std::memcpy(&v, &bits, 8);
    }
  }
}

} // namespace

void ArrayStore::put(const std::string& name, std::vector<std::size_t> shape,
                     std::vector<double> data) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
    throw std::invalid_argument("array name must be non-empty without whitespace: '" + name + "'");
  }
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data.size()) {
    throw std::invalid_argument("array '" + name + "' shape does not match data length");
  }
  for (auto& e : entries_) {
    if (e.name == name) {
      e.shape = std::move(shape);
      e.data = std::move(data);
      return;
    }
  }
  entries_.push_back({name, std::move(shape), std::move(data)});
}

bool ArrayStore::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const ArrayStore::Entry& ArrayStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw std::out_of_range("array '" + name + "' not in store");
}

const std::vector<double>& ArrayStore::data(const std::string& name) const { return find(name).data; }
const std::vector<std::size_t>& ArrayStore::shape(const std::string& name) const { return find(name).shape; }

std::vector<std::string> ArrayStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

void ArrayStore::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << "PIMARRAYS 1\n";
  std::size_t offset = 0;
  for (const auto& e : entries_) {
    f << "array " << e.name << " " << e.shape.size();
    for (std::size_t d : e.shape) f << " " << d;
    f << " " << offset << "\n";
    offset += e.data.size();
  }
  f << "end\n";
  for (const auto& e : entries_) {
    std::vector<double> buf = e.data;
    to_little_endian(buf);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

ArrayStore ArrayStore::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != "PIMARRAYS 1") {
    throw std::runtime_error("'" + path + "' is not a PIMARRAYS container");
  }
  struct Header {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset, count;
  };
  std::vector<Header> headers;
  while (std::getline(f, line)) {
    if (line == "end") break;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag != "array") throw std::runtime_error("bad header line in '" + path + "': " + line);
    Header h;
    std::size_t rank;
    is >> h.name >> rank;
    h.count = 1;
    h.shape.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
      is >> h.shape[i];
      h.count *= h.shape[i];
    }
    is >> h.offset;
    if (!is) throw std::runtime_error("bad header line in '" + path + "': " + line);
    headers.push_back(std::move(h));
  }
  const std::streampos data_start = f.tellg();
  ArrayStore store;
  for (const auto& h : headers) {
    f.seekg(data_start + static_cast<std::streamoff>(h.offset * sizeof(double)));
    std::vector<double> buf(h.count);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(h.count * sizeof(double)));
    if (!f) throw std::runtime_error("truncated data for array '" + h.name + "' in '" + path + "'");
    to_little_endian(buf); // symmetric swap
    store.put(h.name, h.shape, std::move(buf));
  }
  return store;
}

} // namespace pim
