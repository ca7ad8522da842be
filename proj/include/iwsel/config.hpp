// SPDX-License-Identifier: Apache-2.0
//
// Plain-text key/value configuration shared by tap profiles and MCS tables.
//
//   # comment
//   [profile]
//   name = EPA-5
//   delays_ns = 0 30 70
//   powers_db = 0 -1 -2
//   doppler_hz = 5
//
// Each `[section]` header starts a new block; keys repeat freely across
// blocks.
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "iwsel/error.hpp"

namespace iwsel::config {

struct Block {
  std::string section;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  const std::string& get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw Error(Errc::config, "[" + section + "] missing key '" + key + "'");
    return it->second;
  }

  double number(const std::string& key) const {
    const std::string& v = get(key);
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw Error(Errc::config, "[" + section + "] key '" + key + "' is not a number: " + v);
    }
  }

  /// Comma- or whitespace-separated list.
  std::vector<double> numbers(const std::string& key) const {
    std::string text = get(key);
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(Errc::config, "[" + section + "] key '" + key + "' has a bad entry: " + tok);
      }
    }
    return out;
  }
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<Block> parse(std::istream& in) {
  std::vector<Block> blocks;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(Errc::config, "line " + std::to_string(lineno) + ": bad section header");
      blocks.push_back(Block{trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::config, "line " + std::to_string(lineno) + ": expected key = value");
    if (blocks.empty()) blocks.push_back(Block{"", {}});
    blocks.back().values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return blocks;
}

inline std::vector<Block> parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return parse(in);
}

}  // namespace iwsel::config
