#include "flaky/category.hpp"

#include "flaky/error.hpp"

namespace flaky {

std::string_view render(Category c) {
  switch (c) {
    case Category::async_wait: return "async_wait";
    case Category::concurrency: return "concurrency";
    case Category::time: return "time";
    case Category::unordered_collections: return "unordered_collections";
    case Category::order_dependency: return "order_dependency";
    case Category::non_flaky: return "non_flaky";
  }
  return "non_flaky";
}

std::string_view short_name(Category c) {
  switch (c) {
    case Category::async_wait: return "Async.";
    case Category::concurrency: return "Conc.";
    case Category::time: return "Time";
    case Category::unordered_collections: return "UC";
    case Category::order_dependency: return "OD";
    case Category::non_flaky: return "Non-flaky";
  }
  return "Non-flaky";
}

Category parse_category(std::string_view s) {
  for (Category c : kAllCategories) {
    if (render(c) == s) return c;
  }
  throw InputError("unknown label '" + std::string(s) + "'");
}

}  // namespace flaky
