#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace idsr {

using real = double;
using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<real, Eigen::Dynamic, 1>;

// Base error; `category()` feeds the CLI's categorized error line.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* category() const { return "runtime"; }
};

class DataError : public Error {
 public:
  using Error::Error;
  const char* category() const override { return "data"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const override { return "config"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* category() const override { return "io"; }
};

}  // namespace idsr
