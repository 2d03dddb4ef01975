#pragma once

#include <stdexcept>
#include <string>

namespace ftp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FTP_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// kinematics
FTP_DEFINE_ERROR(JointLimitViolation);
// geometry
FTP_DEFINE_ERROR(EmptyObstacleList);
// gridmap
FTP_DEFINE_ERROR(OutOfBounds);
// planner
FTP_DEFINE_ERROR(NoPathFound);
FTP_DEFINE_ERROR(StartInCollision);
FTP_DEFINE_ERROR(GoalInCollision);
FTP_DEFINE_ERROR(OutOfDomain);
FTP_DEFINE_ERROR(InfeasibleSeed);
// nn / rl
FTP_DEFINE_ERROR(ShapeMismatch);
FTP_DEFINE_ERROR(InvalidProgress);
FTP_DEFINE_ERROR(LengthMismatch);
// configuration and file IO
FTP_DEFINE_ERROR(ConfigError);
FTP_DEFINE_ERROR(IoError);

#undef FTP_DEFINE_ERROR

}  // namespace ftp
