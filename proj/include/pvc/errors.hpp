#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pvc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A voxel index lies outside its grid.
class BoundsError : public Error {
public:
    using Error::Error;
};

/// Grid geometry is invalid, or a shape does not fit its grid.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Two grids that must describe the same voxels do not.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed file. Carries the byte offset where parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// A required DICOM attribute is absent from a file.
class MissingTagError : public Error {
public:
    MissingTagError(const std::string& tag_name, const std::string& file)
        : Error("missing required DICOM tag " + tag_name + " in " + file), tag_(tag_name) {}

    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

}  // namespace pvc
