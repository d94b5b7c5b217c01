#include "metaslice/analyzer.hpp"

#include <stdexcept>

namespace metaslice {

namespace {

// Eligible instance of `function_type` in `target` to share: sharers < cap,
// highest sharer count first, then lowest instance id.
const FunctionInstance* pick_shareable(const MetaInstance& target, int function_type,
                                       int sharing_cap) {
  const FunctionInstance* best = nullptr;
  for (const auto& [id, inst] : target.functions) {
    if (inst.function_type != function_type || inst.sharers >= sharing_cap) continue;
    if (best == nullptr || inst.sharers > best->sharers) best = &inst;
  }
  return best;
}

}  // namespace

FunctionVector MetaInstance::function_vector(std::size_t function_types) const {
  std::vector<std::uint8_t> bits(function_types, 0);
  for (const auto& [id, inst] : functions) bits.at(inst.function_type - 1) = 1;
  return FunctionVector(std::move(bits));
}

double jaccard(const FunctionVector& a, const FunctionVector& b) {
  if (a.width() != b.width()) throw std::invalid_argument("function vector width mismatch");
  long dot = 0, norm_a = 0, norm_b = 0;
  for (std::size_t f = 0; f < a.width(); ++f) {
    const long x = a.bits()[f], y = b.bits()[f];
    dot += x * y;
    norm_a += x * x;
    norm_b += y * y;
  }
  const long denom = norm_a + norm_b - dot;
  if (denom == 0) throw std::invalid_argument("jaccard undefined for two zero vectors");
  return static_cast<double>(dot) / static_cast<double>(denom);
}

const MetaInstance* select_metainstance(const MetaSliceSpec& spec,
                                        const std::map<int, MetaInstance>& live) {
  const MetaInstance* best = nullptr;
  double best_sim = 0.0;
  // std::map iterates ascending by id, so strict > keeps the lowest id on ties.
  for (const auto& [id, mi] : live) {
    const double sim = jaccard(spec.functions, mi.function_vector(spec.functions.width()));
    if (sim > best_sim) {
      best_sim = sim;
      best = &mi;
    }
  }
  return best;
}

ResourceVector net_demand(const MetaSliceSpec& spec, const MetaInstance* target,
                          bool sharing_enabled, int sharing_cap) {
  if (!sharing_enabled || target == nullptr) return gross_demand(spec);
  std::int64_t unshared = 0;
  for (int f : spec.functions.types()) {
    if (pick_shareable(*target, f, sharing_cap) == nullptr) ++unshared;
  }
  return spec.per_function_demand.scaled(unshared);
}

MetaSliceAnalyzer::MetaSliceAnalyzer(AnalyzerConfig config) : config_(config) {
  if (config_.function_types <= 0) throw std::invalid_argument("K must be > 0");
  if (config_.sharing_cap <= 0) throw std::invalid_argument("N_L must be > 0");
}

void MetaSliceAnalyzer::validate_spec(const MetaSliceSpec& spec) const {
  if (static_cast<int>(spec.functions.width()) != config_.function_types) {
    throw std::invalid_argument("function vector width does not match K");
  }
  if (spec.functions.popcount() == 0) {
    throw std::invalid_argument("a MetaSlice needs at least one function");
  }
}

const MetaInstance* MetaSliceAnalyzer::select(const MetaSliceSpec& spec) const {
  if (!config_.sharing_enabled) return nullptr;
  return select_metainstance(spec, metainstances_);
}

ResourceVector MetaSliceAnalyzer::net_demand(const MetaSliceSpec& spec) const {
  return metaslice::net_demand(spec, select(spec), config_.sharing_enabled,
                               config_.sharing_cap);
}

std::optional<AdmissionOutcome> MetaSliceAnalyzer::admit(const MetaSliceSpec& spec,
                                                         SystemPool& pool) {
  validate_spec(spec);
  const MetaInstance* target = select(spec);
  const ResourceVector net = metaslice::net_demand(spec, target, config_.sharing_enabled,
                                                   config_.sharing_cap);
  if (!pool.checked_alloc(net)) return std::nullopt;

  // Nothing below can fail, so the admission is all-or-nothing.
  AdmissionOutcome out;
  out.slice_id = next_slice_id_++;
  out.net_allocation = net;
  MetaInstance* mi;
  if (target != nullptr) {
    mi = &metainstances_.at(target->id);
  } else {
    const int id = next_metainstance_id_++;
    mi = &metainstances_[id];
    mi->id = id;
    out.created_metainstance = true;
  }
  out.metainstance_id = mi->id;

  LiveMetaSlice live{out.slice_id, spec, mi->id, {}};
  for (int f : spec.functions.types()) {
    const FunctionInstance* shared =
        config_.sharing_enabled ? pick_shareable(*mi, f, config_.sharing_cap) : nullptr;
    if (shared != nullptr) {
      FunctionInstance& inst = mi->functions.at(shared->id);
      ++inst.sharers;
      out.shared_bindings[f] = inst.id;
      live.instance_ids.push_back(inst.id);
    } else {
      FunctionInstance inst{next_instance_id_++, f, 1, spec.per_function_demand};
      mi->functions.emplace(inst.id, inst);
      out.new_instances.push_back(inst);
      live.instance_ids.push_back(inst.id);
    }
  }
  mi->members.insert(out.slice_id);
  slices_.emplace(out.slice_id, std::move(live));
  return out;
}

ResourceVector MetaSliceAnalyzer::depart(SliceId slice_id, SystemPool& pool) {
  auto it = slices_.find(slice_id);
  if (it == slices_.end()) {
    throw AccountingError("departure of unknown slice " + std::to_string(slice_id));
  }
  const LiveMetaSlice& live = it->second;
  auto mi_it = metainstances_.find(live.metainstance_id);
  if (mi_it == metainstances_.end()) {
    throw AccountingError("slice bound to a missing MetaInstance");
  }
  MetaInstance& mi = mi_it->second;

  ResourceVector freed(pool.capacity().size());
  for (int inst_id : live.instance_ids) {
    auto inst_it = mi.functions.find(inst_id);
    if (inst_it == mi.functions.end() || inst_it->second.sharers <= 0) {
      throw AccountingError("slice bound to a missing function instance");
    }
    if (--inst_it->second.sharers == 0) {
      freed += inst_it->second.footprint;
      mi.functions.erase(inst_it);
    }
  }
  pool.release(freed);
  mi.members.erase(slice_id);
  if (mi.members.empty()) {
    if (!mi.functions.empty()) {
      throw AccountingError("empty MetaInstance still holds function instances");
    }
    metainstances_.erase(mi_it);
  }
  slices_.erase(it);
  return freed;
}

AuditReport MetaSliceAnalyzer::audit(const SystemPool& pool) const {
  AuditReport report;
  auto fail = [&report](std::string msg) {
    ++report.violations;
    report.messages.push_back(std::move(msg));
  };

  ResourceVector held(pool.capacity().size());
  std::map<int, int> bound;  // instance id -> number of slices bound to it
  for (const auto& [id, live] : slices_) {
    for (int inst_id : live.instance_ids) ++bound[inst_id];
  }
  for (const auto& [mi_id, mi] : metainstances_) {
    if (mi.members.empty()) fail("MetaInstance " + std::to_string(mi_id) + " is empty");
    for (const auto& [inst_id, inst] : mi.functions) {
      held += inst.footprint;
      if (inst.sharers < 1 || inst.sharers > config_.sharing_cap) {
        fail("instance " + std::to_string(inst_id) + " has " +
             std::to_string(inst.sharers) + " sharers");
      }
      if (bound[inst_id] != inst.sharers) {
        fail("instance " + std::to_string(inst_id) + " sharer count disagrees with bindings");
      }
    }
  }
  if (held != pool.allocated()) {
    fail("pool allocated " + to_string(pool.allocated()) + " but live footprints sum to " +
         to_string(held));
  }
  if (!pool.allocated().fits_within(pool.capacity())) fail("allocation exceeds capacity");
  return report;
}

const LiveMetaSlice& MetaSliceAnalyzer::slice(SliceId id) const {
  auto it = slices_.find(id);
  if (it == slices_.end()) throw AccountingError("unknown slice " + std::to_string(id));
  return it->second;
}

std::size_t MetaSliceAnalyzer::live_instance_count() const {
  std::size_t n = 0;
  for (const auto& [id, mi] : metainstances_) n += mi.functions.size();
  return n;
}

}  // namespace metaslice
