// Copyright 2026 The Retroptics Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace retroptics::cli {

// Exit codes: 0 ok, 1 internal error, 2 user error (bad arguments/input).
inline constexpr int kOk = 0;
inline constexpr int kInternalError = 1;
inline constexpr int kUserError = 2;

// Runs the full command-line interface in-process. `argv` excludes the
// program name; output streams receive exactly what the binary would print.
int run(const std::vector<std::string>& argv, std::ostream& out,
        std::ostream& err);

}  // namespace retroptics::cli
