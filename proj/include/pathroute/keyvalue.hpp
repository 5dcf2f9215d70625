// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pathroute::kv {

/// Flat `key = value` mapping. Keys are kept sorted so echoes are stable.
using KeyValues = std::map<std::string, std::string>;

/// Parses UTF-8 text with one `key = value` per line. Blank lines and lines
/// starting with '#' are skipped; duplicate keys and lines without '=' throw
/// ConfigError naming the line.
KeyValues parse(std::string_view text);

std::string format(const KeyValues& kv);

KeyValues read_file(const std::string& path);

// Typed accessors; malformed values throw ConfigError naming the key.
int to_int(const std::string& key, const std::string& value);
long long to_int64(const std::string& key, const std::string& value);
unsigned long long to_uint64(const std::string& key, const std::string& value);
double to_double(const std::string& key, const std::string& value);
bool to_bool(const std::string& key, const std::string& value);
std::vector<double> to_double_list(const std::string& key, const std::string& value);

std::string from_double(double v);

}  // namespace pathroute::kv
