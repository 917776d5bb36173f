#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace lockstep {

/// Recency category of a batch relative to the current step.
enum class Category { updating, recent, ancient, none };

std::string_view to_string(Category c);

/// Last step at which each batch served as the updating batch.
class BatchLedger {
 public:
  explicit BatchLedger(std::size_t num_batches) : last_used_(num_batches) {}

  std::size_t num_batches() const { return last_used_.size(); }

  void mark_used(std::int64_t batch_id, std::int64_t step);

  /// nullopt for a batch that has never been used.
  std::optional<std::int64_t> last_used(std::int64_t batch_id) const;

  /// step - last_used, or nullopt when never used.
  std::optional<std::int64_t> age(std::int64_t batch_id, std::int64_t step) const;

 private:
  std::vector<std::optional<std::int64_t>> last_used_;
};

/// Age 0 -> updating, 1..recent_max_age -> recent, >= ancient_min_age ->
/// ancient, anything else (including never used) -> none. Indexed by batch id.
/// Throws std::invalid_argument unless 1 <= recent_max_age < ancient_min_age.
std::vector<Category> categorize(const BatchLedger& ledger, std::int64_t step,
                                 std::int64_t recent_max_age, std::int64_t ancient_min_age);

}  // namespace lockstep
