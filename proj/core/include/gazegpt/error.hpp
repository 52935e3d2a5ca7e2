#pragma once

#include <stdexcept>
#include <string>

namespace gazegpt {

/// Invalid argument or value outside an operation's domain.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A gaze ray or scene point lies behind the camera.
class BehindCameraError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Collinear or duplicated correspondences handed to plane registration.
class DegenerateConfigurationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A manifest, calibration or config file does not validate. `field()` names the offender.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class MissingAssetError : public std::runtime_error {
public:
    explicit MissingAssetError(std::string path)
        : std::runtime_error("missing asset: " + path), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class TimestampOrderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OutOfRangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Statistical input with no usable variance (e.g. a constant matrix).
class DegenerateDataError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace gazegpt
