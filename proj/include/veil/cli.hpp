/*
 * Copyright 2026 The Veil Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef VEIL_CLI_HPP
#define VEIL_CLI_HPP

#include <ostream>

namespace veil {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `veil` binary, callable in-process. Subcommands:
/// train, attack, augment, eval, serve, fixture.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace veil

#endif // VEIL_CLI_HPP
