#include "demoforge/tasks.hpp"

#include <algorithm>

#include "demoforge/error.hpp"

namespace demoforge {

namespace detail {
extern const char* const kBuiltinBlockInsertion;
extern const char* const kBuiltinPlaceRedInGreen;
extern const char* const kBuiltinTowersOfHanoi;
extern const char* const kBuiltinStackBlockPyramid;
}  // namespace detail

std::string_view task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::block_insertion: return "block-insertion";
    case TaskKind::place_red_in_green: return "place-red-in-green";
    case TaskKind::towers_of_hanoi: return "towers-of-hanoi";
    case TaskKind::stack_block_pyramid: return "stack-block-pyramid";
  }
  return "unknown";
}

std::optional<TaskKind> task_from_string(std::string_view name) {
  std::string normalized(name);
  std::replace(normalized.begin(), normalized.end(), '_', '-');
  for (const TaskKind k : kAllTasks)
    if (task_name(k) == normalized) return k;
  return std::nullopt;
}

std::size_t task_index(TaskKind kind) {
  return static_cast<std::size_t>(std::find(kAllTasks.begin(), kAllTasks.end(), kind) - kAllTasks.begin());
}

std::string_view builtin_task_text(TaskKind kind) {
  switch (kind) {
    case TaskKind::block_insertion: return detail::kBuiltinBlockInsertion;
    case TaskKind::place_red_in_green: return detail::kBuiltinPlaceRedInGreen;
    case TaskKind::towers_of_hanoi: return detail::kBuiltinTowersOfHanoi;
    case TaskKind::stack_block_pyramid: return detail::kBuiltinStackBlockPyramid;
  }
  throw Error("UNKNOWN_TASK", "no built-in specification");
}

TaskSpec builtin_task_spec(TaskKind kind) { return parse_task_spec_or_throw(builtin_task_text(kind)); }

}  // namespace demoforge
