#pragma once

#include <stdexcept>
#include <string>

namespace tubepi {

enum class ErrorKind {
    DegenerateMetric,
    NoTrajectory,
    StepSize,
    FrameIntegration,
    OutOfChart,
    Shape,
    Domain,
    NearPole,
    Contour,
    Boundary,
    Numerical,
    NoData,
    Partition,
    BoundViolation,
    MisdeclaredBound,
    Weight,
    Range,
    Size,
    Config,
    Parse,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::DegenerateMetric: return "degenerate metric";
    case ErrorKind::NoTrajectory: return "no trajectory";
    case ErrorKind::StepSize: return "step size";
    case ErrorKind::FrameIntegration: return "frame integration";
    case ErrorKind::OutOfChart: return "out of chart";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::NearPole: return "near pole";
    case ErrorKind::Contour: return "contour";
    case ErrorKind::Boundary: return "boundary";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::NoData: return "no data";
    case ErrorKind::Partition: return "partition";
    case ErrorKind::BoundViolation: return "bound violation";
    case ErrorKind::MisdeclaredBound: return "misdeclared bound";
    case ErrorKind::Weight: return "weight";
    case ErrorKind::Range: return "range";
    case ErrorKind::Size: return "size";
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    }
    return "error";
}

}  // namespace tubepi
