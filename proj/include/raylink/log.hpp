/**
 * @file   log.hpp
 * @brief  Library warnings. The default handler prints to stderr.
 */
#pragma once

#include <functional>
#include <string>

namespace raylink {

using WarningHandler = std::function<void(const std::string&)>;

/// Installs `handler` and returns the previous one; an empty handler restores stderr.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace raylink
