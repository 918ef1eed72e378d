#pragma once

#include <stdexcept>
#include <string>

namespace fc {

class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based line number when known.
class ParseError : public Error
{
  public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
    {
    }
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

class ValidationError : public Error
{
  public:
    using Error::Error;
};

class LookupError : public Error
{
  public:
    using Error::Error;
};

class ConfigError : public Error
{
  public:
    using Error::Error;
};

/// The gated rejection loop ran out of retries.
class RejectionFailure : public Error
{
  public:
    RejectionFailure(const std::string& what, double best_iou_v1, double best_iou_v2, int attempts)
        : Error(what), best_iou_v1(best_iou_v1), best_iou_v2(best_iou_v2), attempts(attempts)
    {
    }
    double best_iou_v1;
    double best_iou_v2;
    int attempts;
};

/// Pre-training stopped because too many pairs failed the gates in one epoch.
class TrainingAborted : public Error
{
  public:
    using Error::Error;
};

}  // namespace fc
