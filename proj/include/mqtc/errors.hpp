#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mqtc {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or depth disagreement between grids, topologies or encodings.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Scalar argument outside its admissible interval.
class DomainError : public Error {
public:
    using Error::Error;
};

// Node identifier outside the tree, or cell outside the grid.
class IndexError : public Error {
public:
    using Error::Error;
};

// Topology violates the parent-before-child expansion rule.
class ValidityError : public Error {
public:
    using Error::Error;
};

// Leaf budget below the minimum of one.
class BudgetError : public Error {
public:
    using Error::Error;
};

// Problem size exceeds an enumeration or solver guard.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Malformed payload bytes; carries the offending byte offset.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// Malformed map file; message carries the row/column location.
class IngestionError : public Error {
public:
    using Error::Error;
};

// Filesystem failure (missing file, unwritable path).
class IoError : public Error {
public:
    using Error::Error;
};

// Inconsistent run configuration (schedule length, scenario parameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Internal postcondition failed; indicates a bug, not bad input.
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace mqtc
