#include "cadex/data.hpp"

#include <stdexcept>

#include "cadex/errors.hpp"

namespace cadex {

void FlowSet::add(FlowField field) {
  const auto key = std::make_pair(field.from, field.to);
  if (index_.count(key)) {
    throw DataError("FlowSet: duplicate flow " + std::to_string(field.from) + "->" + std::to_string(field.to));
  }
  index_[key] = fields_.size();
  fields_.push_back(std::move(field));
}

const FlowField* FlowSet::find(int from, int to) const {
  const auto it = index_.find({from, to});
  return it == index_.end() ? nullptr : &fields_[it->second];
}

std::string to_string(PairKind kind) { return kind == PairKind::Flow ? "flow" : "longterm"; }

PairKind pair_kind_from_string(const std::string& s) {
  if (s == "flow") return PairKind::Flow;
  if (s == "longterm") return PairKind::LongTerm;
  throw DataError("unknown correspondence kind '" + s + "'");
}

}  // namespace cadex
