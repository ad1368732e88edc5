/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <stdexcept>
#include <string>

namespace cdan {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A numeric argument is outside the operation's domain.
class ValueError : public Error {
public:
    using Error::Error;
};

/// Filesystem or codec failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// The image uses a PNG bit depth or color type other than 8-bit RGB.
class UnsupportedFormatError : public IoError {
public:
    using IoError::IoError;
};

class CheckpointVersionError : public IoError {
public:
    using IoError::IoError;
};

/// Truncated or otherwise malformed checkpoint archive.
class CorruptArchiveError : public IoError {
public:
    using IoError::IoError;
};

/// Archive tensor does not exist in (or does not fit) the target model.
class UnknownTensorError : public IoError {
public:
    using IoError::IoError;
};

/// Training produced a NaN or infinite loss.
class NonFiniteLossError : public Error {
public:
    using Error::Error;
};

}  // namespace cdan
