#pragma once

#include <stdexcept>
#include <string>

namespace fnsynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file or payload (bad NIfTI header, bad JSON sidecar, bad frame).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Data of the wrong numeric kind, e.g. non-integer voxels read as labels.
class TypeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Shapes or dimensions that should agree do not.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside its documented domain (severity, decay, schedule bounds...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

class EmptyForegroundError : public Error {
public:
    using Error::Error;
};

/// Interpolation mode not allowed for the volume kind.
class ModeError : public Error {
public:
    using Error::Error;
};

/// A label role the operation depends on is absent from the volume.
class MissingRoleError : public Error {
public:
    using Error::Error;
};

class UnmappedLabelError : public Error {
public:
    using Error::Error;
};

class DegenerateClusterError : public Error {
public:
    using Error::Error;
};

/// Denoiser plugin failures: spawn, handshake, framing, short reads.
class PluginError : public Error {
public:
    using Error::Error;
};

} // namespace fnsynth
