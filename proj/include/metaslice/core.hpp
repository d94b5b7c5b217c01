#ifndef METASLICE_CORE_HPP_
#define METASLICE_CORE_HPP_

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace metaslice {

// Raised when resource accounting is inconsistent. This is always a bug in
// the caller, never a recoverable condition: runs must abort on it.
class AccountingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Per-type resource quantities in canonical function-units. One unit of type
// p is the amount a single function instance needs of that type.
class ResourceVector {
 public:
  ResourceVector() = default;
  explicit ResourceVector(std::size_t types, std::int64_t fill = 0);
  ResourceVector(std::initializer_list<std::int64_t> amounts);
  explicit ResourceVector(std::vector<std::int64_t> amounts);

  std::size_t size() const { return amounts_.size(); }
  std::int64_t operator[](std::size_t p) const { return amounts_[p]; }
  const std::vector<std::int64_t>& amounts() const { return amounts_; }

  bool is_zero() const;
  // Componentwise a <= b.
  bool fits_within(const ResourceVector& bound) const;

  ResourceVector& operator+=(const ResourceVector& other);
  // Throws AccountingError if any component would go negative.
  ResourceVector& operator-=(const ResourceVector& other);
  ResourceVector scaled(std::int64_t factor) const;

  friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) {
    return a += b;
  }
  friend ResourceVector operator-(ResourceVector a, const ResourceVector& b) {
    return a -= b;
  }
  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;

 private:
  void check_same_size(const ResourceVector& other) const;

  std::vector<std::int64_t> amounts_;
};

std::ostream& operator<<(std::ostream& os, const ResourceVector& v);
std::string to_string(const ResourceVector& v);

struct ClassParams {
  int class_id = 1;           // 1..G
  double income = 1.0;        // r_g
  double arrival_rate = 1.0;  // requests per hour
  double departure_rate = 1.0;  // per live slice, per hour
};

// Throws std::invalid_argument unless ids cover 1..G exactly and all rates and
// incomes are positive.
void validate_classes(const std::vector<ClassParams>& classes);

// Binary indicator over K function types. Function types are 1-based in the
// public API (1..K), stored 0-based.
class FunctionVector {
 public:
  FunctionVector() = default;
  explicit FunctionVector(std::vector<std::uint8_t> bits);
  // Builds a K-wide vector with the given 1-based types set.
  static FunctionVector from_types(std::size_t k, std::initializer_list<int> types);
  static FunctionVector from_types(std::size_t k, const std::vector<int>& types);

  std::size_t width() const { return bits_.size(); }
  bool has(int function_type) const { return bits_.at(function_type - 1) != 0; }
  int popcount() const;
  std::vector<int> types() const;  // 1-based, ascending
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const FunctionVector&, const FunctionVector&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct MetaSliceSpec {
  int class_id = 1;
  FunctionVector functions;
  ResourceVector per_function_demand;

  bool operator==(const MetaSliceSpec&) const = default;
};

ResourceVector gross_demand(const MetaSliceSpec& spec);

// Capacity N^p and the currently allocated amount. allocated <= capacity
// holds after every public operation.
class SystemPool {
 public:
  SystemPool() = default;
  explicit SystemPool(ResourceVector capacity);
  SystemPool(ResourceVector capacity, ResourceVector allocated);

  const ResourceVector& capacity() const { return capacity_; }
  const ResourceVector& allocated() const { return allocated_; }
  ResourceVector available() const { return capacity_ - allocated_; }

  bool can_allocate(const ResourceVector& demand) const;
  // Allocates exactly `demand` or leaves the pool unchanged and returns false.
  [[nodiscard]] bool checked_alloc(const ResourceVector& demand);
  // Throws AccountingError on underflow; never clamps.
  void release(const ResourceVector& amount);

  friend bool operator==(const SystemPool&, const SystemPool&) = default;

 private:
  ResourceVector capacity_;
  ResourceVector allocated_;
};

}  // namespace metaslice

#endif  // METASLICE_CORE_HPP_
