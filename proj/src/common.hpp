/**
 * Copyright 2026 The kgfusion Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef KGF_COMMON_HPP_
#define KGF_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kgf {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Mirrors the process exit codes of the command line tool.
enum class ErrorKind : int {
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
  kInternal = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string &what) {
  if (!cond) fail(kind, what);
}

}  // namespace kgf

#endif  // KGF_COMMON_HPP_
