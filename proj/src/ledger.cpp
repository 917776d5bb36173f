#include "lockstep/ledger.hpp"

#include <stdexcept>
#include <string>

namespace lockstep {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::updating: return "updating";
    case Category::recent: return "recent";
    case Category::ancient: return "ancient";
    case Category::none: return "none";
  }
  return "none";
}

void BatchLedger::mark_used(std::int64_t batch_id, std::int64_t step) {
  if (batch_id < 0 || static_cast<std::size_t>(batch_id) >= last_used_.size()) {
    throw std::out_of_range("ledger: batch id " + std::to_string(batch_id) + " out of range");
  }
  last_used_[static_cast<std::size_t>(batch_id)] = step;
}

std::optional<std::int64_t> BatchLedger::last_used(std::int64_t batch_id) const {
  if (batch_id < 0 || static_cast<std::size_t>(batch_id) >= last_used_.size()) {
    throw std::out_of_range("ledger: batch id " + std::to_string(batch_id) + " out of range");
  }
  return last_used_[static_cast<std::size_t>(batch_id)];
}

std::optional<std::int64_t> BatchLedger::age(std::int64_t batch_id, std::int64_t step) const {
  const auto last = last_used(batch_id);
  if (!last) return std::nullopt;
  return step - *last;
}

std::vector<Category> categorize(const BatchLedger& ledger, std::int64_t step,
                                 std::int64_t recent_max_age, std::int64_t ancient_min_age) {
  if (recent_max_age < 1 || recent_max_age >= ancient_min_age) {
    throw std::invalid_argument("categorize: need 1 <= recent_max_age < ancient_min_age");
  }
  std::vector<Category> out(ledger.num_batches(), Category::none);
  for (std::size_t b = 0; b < out.size(); ++b) {
    const auto a = ledger.age(static_cast<std::int64_t>(b), step);
    if (!a || *a < 0) continue;
    if (*a == 0) {
      out[b] = Category::updating;
    } else if (*a <= recent_max_age) {
      out[b] = Category::recent;
    } else if (*a >= ancient_min_age) {
      out[b] = Category::ancient;
    }
  }
  return out;
}

}  // namespace lockstep
