#pragma once

#include <stdexcept>
#include <string>

namespace fedup {

// Error categories map one-to-one onto CLI exit codes.
struct Error : std::runtime_error {
    Error(std::string cat, const std::string& message)
        : std::runtime_error(message), category(std::move(cat)) {}
    std::string category;
};

struct UsageError : Error {
    explicit UsageError(const std::string& m) : Error("usage", m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& m) : Error("numerical", m) {}
};
struct IntegrityError : Error {
    explicit IntegrityError(const std::string& m) : Error("integrity", m) {}
};
struct StateError : Error {
    explicit StateError(const std::string& m) : Error("state", m) {}
};
struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace fedup
