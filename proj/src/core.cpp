#include "metaslice/core.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace metaslice {

ResourceVector::ResourceVector(std::size_t types, std::int64_t fill)
    : amounts_(types, fill) {
  if (fill < 0) throw std::invalid_argument("negative resource amount");
}

ResourceVector::ResourceVector(std::initializer_list<std::int64_t> amounts)
    : ResourceVector(std::vector<std::int64_t>(amounts)) {}

ResourceVector::ResourceVector(std::vector<std::int64_t> amounts)
    : amounts_(std::move(amounts)) {
  for (auto a : amounts_) {
    if (a < 0) throw std::invalid_argument("negative resource amount");
  }
}

bool ResourceVector::is_zero() const {
  return std::all_of(amounts_.begin(), amounts_.end(),
                     [](std::int64_t a) { return a == 0; });
}

bool ResourceVector::fits_within(const ResourceVector& bound) const {
  check_same_size(bound);
  for (std::size_t p = 0; p < amounts_.size(); ++p) {
    if (amounts_[p] > bound.amounts_[p]) return false;
  }
  return true;
}

ResourceVector& ResourceVector::operator+=(const ResourceVector& other) {
  check_same_size(other);
  for (std::size_t p = 0; p < amounts_.size(); ++p) amounts_[p] += other.amounts_[p];
  return *this;
}

ResourceVector& ResourceVector::operator-=(const ResourceVector& other) {
  check_same_size(other);
  if (!other.fits_within(*this)) {
    throw AccountingError("resource subtraction underflow: " + to_string(*this) +
                          " - " + to_string(other));
  }
  for (std::size_t p = 0; p < amounts_.size(); ++p) amounts_[p] -= other.amounts_[p];
  return *this;
}

ResourceVector ResourceVector::scaled(std::int64_t factor) const {
  if (factor < 0) throw std::invalid_argument("negative scale factor");
  ResourceVector out = *this;
  for (auto& a : out.amounts_) a *= factor;
  return out;
}

void ResourceVector::check_same_size(const ResourceVector& other) const {
  if (other.amounts_.size() != amounts_.size()) {
    throw std::invalid_argument("resource vector width mismatch");
  }
}

std::ostream& operator<<(std::ostream& os, const ResourceVector& v) {
  os << '(';
  for (std::size_t p = 0; p < v.size(); ++p) {
    if (p) os << ',';
    os << v[p];
  }
  return os << ')';
}

std::string to_string(const ResourceVector& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void validate_classes(const std::vector<ClassParams>& classes) {
  if (classes.empty()) throw std::invalid_argument("at least one class is required");
  std::set<int> ids;
  for (const auto& c : classes) {
    if (!(c.income > 0)) throw std::invalid_argument("class income must be > 0");
    if (!(c.arrival_rate > 0)) throw std::invalid_argument("arrival rate must be > 0");
    if (!(c.departure_rate > 0)) throw std::invalid_argument("departure rate must be > 0");
    ids.insert(c.class_id);
  }
  const int g = static_cast<int>(classes.size());
  if (ids.size() != classes.size() || *ids.begin() != 1 || *ids.rbegin() != g) {
    throw std::invalid_argument("class ids must be distinct and cover 1..G");
  }
}

FunctionVector::FunctionVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) {
    if (b > 1) throw std::invalid_argument("function vector entries must be 0 or 1");
  }
}

FunctionVector FunctionVector::from_types(std::size_t k, std::initializer_list<int> types) {
  return from_types(k, std::vector<int>(types));
}

FunctionVector FunctionVector::from_types(std::size_t k, const std::vector<int>& types) {
  std::vector<std::uint8_t> bits(k, 0);
  for (int t : types) {
    if (t < 1 || static_cast<std::size_t>(t) > k) {
      throw std::invalid_argument("function type out of range");
    }
    bits[t - 1] = 1;
  }
  return FunctionVector(std::move(bits));
}

int FunctionVector::popcount() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), 1));
}

std::vector<int> FunctionVector::types() const {
  std::vector<int> out;
  for (std::size_t f = 0; f < bits_.size(); ++f) {
    if (bits_[f]) out.push_back(static_cast<int>(f) + 1);
  }
  return out;
}

ResourceVector gross_demand(const MetaSliceSpec& spec) {
  return spec.per_function_demand.scaled(spec.functions.popcount());
}

SystemPool::SystemPool(ResourceVector capacity)
    : capacity_(std::move(capacity)), allocated_(capacity_.size()) {}

SystemPool::SystemPool(ResourceVector capacity, ResourceVector allocated)
    : capacity_(std::move(capacity)), allocated_(std::move(allocated)) {
  if (!allocated_.fits_within(capacity_)) {
    throw std::invalid_argument("allocated exceeds capacity");
  }
}

bool SystemPool::can_allocate(const ResourceVector& demand) const {
  return (allocated_ + demand).fits_within(capacity_);
}

bool SystemPool::checked_alloc(const ResourceVector& demand) {
  if (!can_allocate(demand)) return false;
  allocated_ += demand;
  return true;
}

void SystemPool::release(const ResourceVector& amount) {
  if (!amount.fits_within(allocated_)) {
    throw AccountingError("release of " + to_string(amount) + " exceeds allocated " +
                          to_string(allocated_));
  }
  allocated_ -= amount;
}

}  // namespace metaslice
