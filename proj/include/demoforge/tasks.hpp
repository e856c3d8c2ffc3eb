#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "demoforge/taskspec.hpp"

namespace demoforge {

enum class TaskKind { block_insertion, place_red_in_green, towers_of_hanoi, stack_block_pyramid };

inline constexpr std::array<TaskKind, 4> kAllTasks{TaskKind::block_insertion, TaskKind::place_red_in_green,
                                                   TaskKind::towers_of_hanoi, TaskKind::stack_block_pyramid};

/// Hyphenated CLI name, e.g. "block-insertion".
std::string_view task_name(TaskKind kind);
/// Accepts "block-insertion" and "block_insertion".
std::optional<TaskKind> task_from_string(std::string_view name);
/// Position in kAllTasks; used for seed derivation.
std::size_t task_index(TaskKind kind);

/// Canonical text of the shipped task specification (assets/tasks/*.bddl).
std::string_view builtin_task_text(TaskKind kind);
TaskSpec builtin_task_spec(TaskKind kind);

}  // namespace demoforge
