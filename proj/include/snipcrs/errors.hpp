#pragma once

#include <stdexcept>
#include <string>

namespace snipcrs {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class GatewayError : public Error {
 public:
  using Error::Error;
};

// A replay-mode lookup found no recorded response for the request digest.
class ReplayMissError : public GatewayError {
 public:
  ReplayMissError(std::string endpoint, std::string digest)
      : GatewayError("replay miss for " + endpoint + " request " + digest),
        endpoint_(std::move(endpoint)),
        digest_(std::move(digest)) {}

  const std::string& endpoint() const { return endpoint_; }
  const std::string& digest() const { return digest_; }

 private:
  std::string endpoint_;
  std::string digest_;
};

class BackendError : public GatewayError {
 public:
  BackendError(const std::string& what, bool transient)
      : GatewayError(what), transient_(transient) {}

  bool transient() const { return transient_; }

 private:
  bool transient_;
};

// Model output that could not be parsed; keeps the raw text for diagnosis.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}

  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// The simulator produced a target-identifying string twice in a row.
class LeakageError : public Error {
 public:
  using Error::Error;
};

}  // namespace snipcrs
