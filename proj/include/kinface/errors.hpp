// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace kinface {

// Error taxonomy mirrors the CLI exit-code scheme: config (1), I/O (2),
// numeric (3).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension misuse; message always names expected vs actual.
class DimensionError : public ConfigError {
public:
    explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

}  // namespace kinface
