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

#ifndef VEIL_ERROR_HPP
#define VEIL_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace veil {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input record. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid configuration or precondition violation detected before any work.
class ConfigError : public Error {
public:
    using Error::Error;
};

class CorruptFileError : public Error {
public:
    using Error::Error;
};

class FormatVersionError : public Error {
public:
    FormatVersionError(int found, int supported)
        : Error("unsupported model format version " + std::to_string(found) +
                " (this build reads version " + std::to_string(supported) + ")"),
          found_(found) {}

    int found() const noexcept { return found_; }

private:
    int found_;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace veil

#endif // VEIL_ERROR_HPP
