#pragma once

#include <stdexcept>
#include <string>

namespace mpd {

// Base for all toolkit errors; callers that only care about "something in
// the pipeline failed" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Weight / tensor file could not be loaded or failed validation.
class LoadError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class DatasetError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mpd
