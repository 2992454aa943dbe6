#ifndef PIM_CHECKPOINT_HPP
#define PIM_CHECKPOINT_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace pim {

// Flat binary container of named float64 arrays. Layout:
//
//   PIMARRAYS 1\n
//   array <name> <rank> <d0> ... <dk> <offset>\n   (offset in elements,
//   ...                                             relative to data start)
//   end\n
//   <raw little-endian doubles back to back>
//
// Names may not contain whitespace. Write order is insertion order, so a
// container round-trips byte-identically.
class ArrayStore {
public:
  void put(const std::string& name, std::vector<std::size_t> shape, std::vector<double> data);
  bool contains(const std::string& name) const;
  const std::vector<double>& data(const std::string& name) const;
  const std::vector<std::size_t>& shape(const std::string& name) const;
  std::vector<std::string> names() const; // insertion order

  void save(const std::string& path) const;
  static ArrayStore load(const std::string& path);

private:
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;
  };
  const Entry& find(const std::string& name) const;
  std::vector<Entry> entries_;
};

} // namespace pim

#endif
