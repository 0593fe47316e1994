// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <stdexcept>
#include <string>

namespace matseg {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A file or JSON document does not follow the expected layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// An in-memory object violates one of its invariants, or arguments do not fit together.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Training diverged (non-finite loss or gradient).
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace matseg
