#pragma once

#include <stdexcept>
#include <string>

namespace cloak {

// Base class for all toolkit errors so callers can catch one type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// geometry
class DegenerateQuad : public Error {
public:
    explicit DegenerateQuad(const std::string& msg) : Error("DegenerateQuad: " + msg) {}
};
class DegeneratePolygon : public Error {
public:
    explicit DegeneratePolygon(const std::string& msg) : Error("DegeneratePolygon: " + msg) {}
};
class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& msg) : Error("DimensionMismatch: " + msg) {}
};

// pattern
class MissingTexture : public Error {
public:
    explicit MissingTexture(const std::string& msg) : Error("MissingTexture: " + msg) {}
};
class NonDivisibleTarget : public Error {
public:
    explicit NonDivisibleTarget(const std::string& msg) : Error("NonDivisibleTarget: " + msg) {}
};
class IoFailure : public Error {
public:
    explicit IoFailure(const std::string& msg) : Error("IoFailure: " + msg) {}
};

// losses
class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg) : Error("ShapeMismatch: " + msg) {}
};
class OutOfRangeCoordinate : public Error {
public:
    explicit OutOfRangeCoordinate(const std::string& msg) : Error("OutOfRangeCoordinate: " + msg) {}
};
class EmptyPalette : public Error {
public:
    explicit EmptyPalette(const std::string& msg) : Error("EmptyPalette: " + msg) {}
};
class UnknownArchitecture : public Error {
public:
    explicit UnknownArchitecture(const std::string& msg) : Error("UnknownArchitecture: " + msg) {}
};

// detector
class AdapterFailure : public Error {
public:
    explicit AdapterFailure(const std::string& msg) : Error("AdapterFailure: " + msg) {}
};
class ConvergenceFailure : public Error {
public:
    explicit ConvergenceFailure(const std::string& msg) : Error("ConvergenceFailure: " + msg) {}
};

// data
class SchemaViolation : public Error {
public:
    explicit SchemaViolation(const std::string& msg) : Error("SchemaViolation: " + msg) {}
};
class MissingImageFile : public Error {
public:
    explicit MissingImageFile(const std::string& msg) : Error("MissingImageFile: " + msg) {}
};

// training
class NonFiniteLoss : public Error {
public:
    explicit NonFiniteLoss(const std::string& msg) : Error("NonFiniteLoss: " + msg) {}
};

// cli / config
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("ConfigError: " + msg) {}
};

}  // namespace cloak
