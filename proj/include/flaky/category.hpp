#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace flaky {

// Enum order is load-bearing: feature slots, confusion-matrix axes, report
// columns and argmax tie-breaking all follow it.
enum class Category : int {
  async_wait = 0,
  concurrency,
  time,
  unordered_collections,
  order_dependency,
  non_flaky,
};

inline constexpr std::size_t kNumCategories = 6;

inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::async_wait,         Category::concurrency,     Category::time,
    Category::unordered_collections, Category::order_dependency, Category::non_flaky,
};

inline constexpr std::array<Category, 5> kFlakyCategories = {
    Category::async_wait, Category::concurrency, Category::time,
    Category::unordered_collections, Category::order_dependency,
};

constexpr std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }
constexpr bool is_flaky(Category c) { return c != Category::non_flaky; }

std::string_view render(Category c);
// Throws InputError on an unknown label.
Category parse_category(std::string_view s);
// Short column header used in tables ("Async.", "Conc.", ...).
std::string_view short_name(Category c);

}  // namespace flaky
