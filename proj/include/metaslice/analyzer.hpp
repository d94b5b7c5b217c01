#ifndef METASLICE_ANALYZER_HPP_
#define METASLICE_ANALYZER_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metaslice/core.hpp"

namespace metaslice {

using SliceId = std::int64_t;

// A running copy of one function type. Up to the sharing cap N_L slices may
// be bound to it at once.
struct FunctionInstance {
  int id = 0;
  int function_type = 0;  // 1..K
  int sharers = 0;
  ResourceVector footprint;

  bool operator==(const FunctionInstance&) const = default;
};

// A cluster of slices that share function instances. `functions` is the
// function description: it changes on every member arrival and departure.
struct MetaInstance {
  int id = 0;
  std::map<int, FunctionInstance> functions;  // keyed by instance id
  std::set<SliceId> members;

  FunctionVector function_vector(std::size_t function_types) const;

  bool operator==(const MetaInstance&) const = default;
};

struct AdmissionOutcome {
  SliceId slice_id = 0;
  int metainstance_id = 0;
  bool created_metainstance = false;
  std::map<int, int> shared_bindings;  // function type -> joined instance id
  std::vector<FunctionInstance> new_instances;
  ResourceVector net_allocation;  // n_o, sum of new instance footprints
};

struct LiveMetaSlice {
  SliceId id = 0;
  MetaSliceSpec spec;
  int metainstance_id = 0;
  std::vector<int> instance_ids;  // one per function of the slice

  bool operator==(const LiveMetaSlice&) const = default;
};

// Jaccard index a.b / (|a|^2 + |b|^2 - a.b). Throws std::invalid_argument on
// width mismatch or when both vectors are zero.
double jaccard(const FunctionVector& a, const FunctionVector& b);

// MetaInstance with the highest similarity to the spec; lowest id on ties.
// nullptr when there is no candidate with positive similarity.
const MetaInstance* select_metainstance(const MetaSliceSpec& spec,
                                        const std::map<int, MetaInstance>& live);

// Resources a slice would newly allocate if bound into `target`.
ResourceVector net_demand(const MetaSliceSpec& spec, const MetaInstance* target,
                          bool sharing_enabled, int sharing_cap);

struct AnalyzerConfig {
  int function_types = 9;  // K
  int sharing_cap = 5;     // N_L
  bool sharing_enabled = true;

  bool operator==(const AnalyzerConfig&) const = default;
};

struct AuditReport {
  std::size_t violations = 0;
  std::vector<std::string> messages;
  bool ok() const { return violations == 0; }
};

// Owns all MetaInstance state. With sharing disabled every slice gets its own
// MetaInstance and dedicated instances, so the accounting path is the same.
class MetaSliceAnalyzer {
 public:
  explicit MetaSliceAnalyzer(AnalyzerConfig config);

  const AnalyzerConfig& config() const { return config_; }

  const MetaInstance* select(const MetaSliceSpec& spec) const;
  ResourceVector net_demand(const MetaSliceSpec& spec) const;

  // All-or-nothing: returns nullopt with no state change when the pool cannot
  // hold the net demand.
  std::optional<AdmissionOutcome> admit(const MetaSliceSpec& spec, SystemPool& pool);

  // Returns the resources freed. Unknown ids throw AccountingError.
  ResourceVector depart(SliceId slice_id, SystemPool& pool);

  // Checks pool.allocated == sum of live footprints, sharer bounds, and
  // binding consistency.
  AuditReport audit(const SystemPool& pool) const;

  const std::map<int, MetaInstance>& metainstances() const { return metainstances_; }
  const std::map<SliceId, LiveMetaSlice>& slices() const { return slices_; }
  const LiveMetaSlice& slice(SliceId id) const;
  std::size_t live_instance_count() const;

  bool operator==(const MetaSliceAnalyzer&) const = default;

 private:
  void validate_spec(const MetaSliceSpec& spec) const;

  AnalyzerConfig config_;
  std::map<int, MetaInstance> metainstances_;
  std::map<SliceId, LiveMetaSlice> slices_;
  int next_metainstance_id_ = 1;
  int next_instance_id_ = 1;
  SliceId next_slice_id_ = 1;
};

}  // namespace metaslice

#endif  // METASLICE_ANALYZER_HPP_
