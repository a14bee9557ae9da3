#ifndef CAMDENSE_ERRORS_HPP
#define CAMDENSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace camdense {

/// Base class for all camdense errors. Subclasses split into input errors
/// (bad files, bad shapes) and numeric errors (degenerate geometry, failed
/// optimization); the CLI maps them to exit codes 2 and 3 respectively.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct NetworkError : Error {
  using Error::Error;
};

// geometry
struct PointBehindCamera : NumericError {
  PointBehindCamera() : NumericError("point behind camera (scale factor s <= 0)") {}
  explicit PointBehindCamera(const std::string& what) : NumericError(what) {}
};
struct RayParallelToPlane : NumericError {
  RayParallelToPlane() : NumericError("back-projection ray parallel to plane") {}
};
struct NotARotation : NumericError {
  explicit NotARotation(const std::string& what = "matrix is not a rotation") : NumericError(what) {}
};

// pnp
struct TooFewPoints : InputError {
  explicit TooFewPoints(const std::string& what = "too few point correspondences") : InputError(what) {}
};
struct DegenerateConfiguration : NumericError {
  explicit DegenerateConfiguration(const std::string& what = "degenerate point configuration")
      : NumericError(what) {}
};
struct NoConsensus : NumericError {
  NoConsensus() : NumericError("RANSAC found no consensus set of at least minimal size") {}
  explicit NoConsensus(const std::string& what) : NumericError(what) {}
};

// optimize
struct ObjectiveNonFinite : NumericError {
  ObjectiveNonFinite() : NumericError("objective is not finite at the start point") {}
};
struct Infeasible : NumericError {
  Infeasible() : NumericError("linear program is infeasible") {}
};
struct Unbounded : NumericError {
  Unbounded() : NumericError("linear program is unbounded in the objective direction") {}
};

// mvcalib
struct NoFeasibleVehicle : InputError {
  NoFeasibleVehicle() : InputError("no vehicle has enough visible keypoints for calibration") {}
};

// measurement / density
struct MissingGroundTruth : InputError {
  MissingGroundTruth() : InputError("segment set carries no true length to evaluate against") {}
};
struct ZeroLaneLength : InputError {
  explicit ZeroLaneLength(const std::string& what = "lane has zero metric length") : InputError(what) {}
};
struct LengthMismatch : InputError {
  explicit LengthMismatch(const std::string& what = "series lengths differ") : InputError(what) {}
};

// dataset mixer
struct ShapeMismatch : InputError {
  explicit ShapeMismatch(const std::string& what = "allocation shape does not match manifest")
      : InputError(what) {}
};

// detection
struct OverlappingLanes : InputError {
  explicit OverlappingLanes(const std::string& what = "lane polygons overlap") : InputError(what) {}
};

// fd_fit
struct DensityOutOfRange : InputError {
  explicit DensityOutOfRange(const std::string& what = "density outside the model's valid range")
      : InputError(what) {}
};

// synth
struct PlacementFailure : NumericError {
  PlacementFailure() : NumericError("could not place vehicles without overlap within retry budget") {}
};

// io
struct ParseError : InputError {
  using InputError::InputError;
};

}  // namespace camdense

#endif  // CAMDENSE_ERRORS_HPP
