#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace urbandiff {

// Base error. `category()` is a stable machine-readable tag; the CLI maps
// categories to exit codes and emits them in its structured error output.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& m) : Error("parameter", m) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& m) : Error("domain", m) {}
};

struct StateError : Error {
    explicit StateError(const std::string& m) : Error("state", m) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error("format", m) {}
};

struct CompatibilityError : Error {
    explicit CompatibilityError(const std::string& m) : Error("compatibility", m) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& m) : Error("training", m) {}
};

struct GuidanceError : Error {
    explicit GuidanceError(const std::string& m) : Error("guidance", m) {}
};

struct GenerationError : Error {
    explicit GenerationError(const std::string& m) : Error("generation", m) {}
};

struct MetricError : Error {
    explicit MetricError(const std::string& m) : Error("metric", m) {}
};

struct BaselineError : Error {
    explicit BaselineError(const std::string& m) : Error("baseline", m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace urbandiff
