#pragma once

#include <string>
#include <utility>

#include "infocir/error.hpp"

namespace infocir::detail {

/// Splits "http://host:port/some/prefix" into ("http://host:port", "/some/prefix").
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) fail(ErrorKind::kInvalidArgument, "URL without scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

}  // namespace infocir::detail
