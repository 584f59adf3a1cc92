#pragma once

#include <stdexcept>
#include <string>

namespace lvgrid {

// Input / configuration problems. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures during computation. The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

class RankDeficient : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ZeroColumn : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularSystem : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DomainViolation : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class CycleDetected : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DisconnectedNode : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NonPositiveResistance : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ProfileLengthMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InvalidConfig : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class BranchingUnsupported : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InconsistentSnapshotLengths : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class MissingChildPayload : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class Deadlock : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IncompleteSweep : public ValidationError {
public:
    using ValidationError::ValidationError;
};

} // namespace lvgrid
